#include "beamsplit/dataset.hpp"

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "beamsplit/errors.hpp"
#include "beamsplit/image_io.hpp"
#include "beamsplit/ply.hpp"

namespace beamsplit {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const char* label_name(PointLabel l) {
  return l == PointLabel::kTransmitted ? "transmitted" : "reflected";
}

PointLabel label_from(const std::string& s) {
  if (s == "transmitted") return PointLabel::kTransmitted;
  if (s == "reflected") return PointLabel::kReflected;
  throw data_error("point_labels: unknown label '" + s + "'");
}

}  // namespace

void save_dataset(const std::string& dir, const SynthDataset& dataset) {
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "gt");

  json manifest;
  manifest["spec"] = json::parse(synth_spec_to_json(dataset.spec));
  manifest["n_views"] = dataset.captures.views.size();
  manifest["n_flash"] = dataset.captures.count_flash();
  manifest["n_noflash"] = dataset.captures.count_noflash();
  {
    std::ofstream f(fs::path(dir) / "manifest.json", std::ios::binary);
    if (!f) throw data_error("cannot write manifest in " + dir);
    f << manifest.dump(2) << "\n";
  }

  save_poses((fs::path(dir) / "poses.json").string(), dataset.captures.views);

  for (std::size_t i = 0; i < dataset.captures.views.size(); ++i) {
    const CameraView& v = dataset.captures.views[i];
    const fs::path img_base = fs::path(dir) / "images" / v.view_id;
    write_pfm(img_base.string() + ".pfm", v.image);
    write_png_preview(img_base.string() + ".png", v.image);
    const OracleMaps& gt = dataset.gt[i];
    const fs::path gt_base = fs::path(dir) / "gt" / v.view_id;
    write_pfm(gt_base.string() + "_tn.pfm", gt.t_n);
    write_pfm(gt_base.string() + "_betar.pfm", gt.beta_r);
    write_pfm(gt_base.string() + "_r.pfm", gt.r_layer);
    write_pfm(gt_base.string() + "_beta.pfm", gt.beta_map);
    write_pfm(gt_base.string() + "_deptht.pfm", gt.depth_t);
    write_pfm(gt_base.string() + "_depthr.pfm", gt.depth_r);
    write_pfm(gt_base.string() + "_mask.pfm", gt.mask);
  }

  PointSet flash_set{dataset.flash_points.positions,
                     dataset.flash_points.colors};
  PointSet noflash_set{dataset.noflash_points.positions,
                       dataset.noflash_points.colors};
  write_points_ply((fs::path(dir) / "points_flash.ply").string(), flash_set);
  write_points_ply((fs::path(dir) / "points_noflash.ply").string(),
                   noflash_set);

  json labels;
  labels["flash"] = json::array();
  for (auto l : dataset.flash_labels) labels["flash"].push_back(label_name(l));
  labels["noflash"] = json::array();
  for (auto l : dataset.noflash_labels)
    labels["noflash"].push_back(label_name(l));
  std::ofstream lf(fs::path(dir) / "point_labels.json", std::ios::binary);
  if (!lf) throw data_error("cannot write point_labels in " + dir);
  lf << labels.dump(2) << "\n";
}

LoadedDataset load_dataset(const std::string& dir) {
  LoadedDataset ds;
  {
    std::ifstream f(fs::path(dir) / "manifest.json", std::ios::binary);
    if (!f) throw data_error("missing manifest.json in " + dir);
    json manifest;
    try {
      f >> manifest;
    } catch (const json::parse_error& e) {
      throw data_error(std::string("manifest.json: ") + e.what());
    }
    ds.spec = synth_spec_from_json(manifest.at("spec").dump());
  }

  ds.captures.views = load_poses((fs::path(dir) / "poses.json").string());
  for (auto& v : ds.captures.views) {
    const fs::path img = fs::path(dir) / "images" / (v.view_id + ".pfm");
    v.image = read_pfm(img.string());
    if (v.image.width() != v.intrinsics.width ||
        v.image.height() != v.intrinsics.height) {
      throw data_error("image size mismatch for " + v.view_id);
    }
  }

  const fs::path gt_dir = fs::path(dir) / "gt";
  bool have_gt = true;
  for (const auto& v : ds.captures.views) {
    if (!fs::exists(gt_dir / (v.view_id + "_tn.pfm"))) have_gt = false;
  }
  if (have_gt && !ds.captures.views.empty()) {
    for (const auto& v : ds.captures.views) {
      OracleMaps gt;
      const std::string base = (gt_dir / v.view_id).string();
      gt.t_n = read_pfm(base + "_tn.pfm");
      gt.beta_r = read_pfm(base + "_betar.pfm");
      gt.r_layer = read_pfm(base + "_r.pfm");
      gt.beta_map = read_pfm(base + "_beta.pfm");
      gt.depth_t = read_pfm(base + "_deptht.pfm");
      gt.depth_r = read_pfm(base + "_depthr.pfm");
      gt.mask = read_pfm(base + "_mask.pfm");
      ds.gt.push_back(std::move(gt));
    }
  }

  const fs::path flash_ply = fs::path(dir) / "points_flash.ply";
  const fs::path noflash_ply = fs::path(dir) / "points_noflash.ply";
  if (fs::exists(flash_ply) && fs::exists(noflash_ply)) {
    PointSet fp = read_points_ply(flash_ply.string());
    PointSet np = read_points_ply(noflash_ply.string());
    ds.flash_points.positions = std::move(fp.positions);
    ds.flash_points.colors = std::move(fp.colors);
    ds.flash_points.flash_source = true;
    ds.noflash_points.positions = std::move(np.positions);
    ds.noflash_points.colors = std::move(np.colors);

    const fs::path labels_path = fs::path(dir) / "point_labels.json";
    if (fs::exists(labels_path)) {
      std::ifstream lf(labels_path, std::ios::binary);
      json labels;
      try {
        lf >> labels;
      } catch (const json::parse_error& e) {
        throw data_error(std::string("point_labels.json: ") + e.what());
      }
      for (const auto& s : labels.at("flash")) {
        ds.flash_labels.push_back(label_from(s.get<std::string>()));
      }
      for (const auto& s : labels.at("noflash")) {
        ds.noflash_labels.push_back(label_from(s.get<std::string>()));
      }
    }
  }
  return ds;
}

}  // namespace beamsplit
