#include "beamsplit/scene_model.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "beamsplit/errors.hpp"
#include "beamsplit/ply.hpp"

namespace beamsplit {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {
// Below this raw-domain magnitude the composite power-law derivatives are
// replaced with their exact limits.
constexpr double kRawTiny = 1e-40;
}  // namespace

bool SceneModel::valid() const {
  if (!(gamma_exponent > 0.0 && gamma_exponent <= 1.0)) return false;
  if (mode == SceneMode::kHardLinear && !hard_linear.has_value()) return false;
  if (t_n.channels != 3 || r.channels != 3 || beta.channels != 1) return false;
  if (!t_n.valid() || !r.valid() || !beta.valid()) return false;
  if (uses_tf_cloud() && (t_f.channels != 3 || !t_f.valid())) return false;
  return true;
}

CompositeRender render_composite(const SceneModel& scene,
                                 const CameraView& view) {
  CompositeRender cr;
  cr.flash = view.flash;
  cr.gamma_exponent = scene.gamma_exponent;

  cr.rt_t = render(scene.transmission_for(view.flash), view);
  cr.rt_r = render(scene.r, view);
  cr.rt_beta = render(scene.beta, view);

  cr.derived_scale = 1.0;
  if (scene.mode == SceneMode::kHardLinear && view.flash) {
    // gamma(c * gamma^-1(x)) = c^e * x: the hard constraint is a constant
    // scale in the tone-mapped domain.
    cr.derived_scale = std::pow(*scene.hard_linear, scene.gamma_exponent);
  }

  const int w = view.intrinsics.width, h = view.intrinsics.height;
  const double e = scene.gamma_exponent;
  const double inv_e = 1.0 / e;

  cr.transmission = Image(w, h, 3);
  cr.reflection = cr.rt_r.color;
  cr.beta_map = Image(w, h, 1);
  cr.beta_pre = cr.rt_beta.color;
  cr.t_raw = Image(w, h, 3);
  cr.r_raw = Image(w, h, 3);
  cr.u_raw = Image(w, h, 3);
  cr.composite = Image(w, h, 3);
  cr.depth_t = cr.rt_t.depth;
  cr.depth_r = cr.rt_r.depth;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double b = cr.beta_pre.at(x, y);
      const double bm = beta_activation(b);
      cr.beta_map.at(x, y) = bm;
      for (int c = 0; c < 3; ++c) {
        const double tcol = cr.derived_scale * cr.rt_t.color.at(x, y, c);
        const double rcol = cr.rt_r.color.at(x, y, c);
        cr.transmission.at(x, y, c) = tcol;
        const double traw = std::pow(tcol, inv_e);
        const double rraw = std::pow(rcol, inv_e);
        const double u = traw + bm * rraw;
        cr.t_raw.at(x, y, c) = traw;
        cr.r_raw.at(x, y, c) = rraw;
        cr.u_raw.at(x, y, c) = u;
        cr.composite.at(x, y, c) = std::min(std::pow(u, e), 1.0);
      }
    }
  }
  return cr;
}

CompositeColorGrads composite_backward(const CompositeRender& cr,
                                       const Image& dL_dcomposite) {
  require_same_shape(dL_dcomposite, cr.composite, "composite_backward");
  const int w = cr.composite.width(), h = cr.composite.height();
  const double e = cr.gamma_exponent;

  CompositeColorGrads out;
  out.d_t = Image(w, h, 3);
  out.d_r = Image(w, h, 3);
  out.d_beta = Image(w, h, 1);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double b = cr.beta_pre.at(x, y);
      const double bm = cr.beta_map.at(x, y);
      const double d_act = beta_activation_grad(b);
      double g_bm = 0.0;
      for (int c = 0; c < 3; ++c) {
        // Straight-through across the final [0,1] clamp.
        const double g_u_tone = dL_dcomposite.at(x, y, c);
        const double traw = cr.t_raw.at(x, y, c);
        const double rraw = cr.r_raw.at(x, y, c);
        const double u = cr.u_raw.at(x, y, c);
        const double rcol = cr.reflection.at(x, y, c);

        double d_tone_d_t, d_tone_d_r, d_tone_d_bm;
        if (u < kRawTiny) {
          // Exact limits: composite == T when the reflection term vanishes,
          // and gamma(beta * gamma^-1(R)) == beta^e * R when T vanishes.
          d_tone_d_t = 1.0;
          d_tone_d_r = std::pow(bm, e);
          d_tone_d_bm = 0.0;
        } else {
          const double u_pow = std::pow(u, e - 1.0);  // gamma'(u) / e
          d_tone_d_t = std::pow(traw / u, 1.0 - e);
          d_tone_d_r = (rcol > 0.0) ? bm * u_pow * (rraw / rcol) : 0.0;
          d_tone_d_bm = e * u_pow * rraw;
        }
        out.d_t.at(x, y, c) = g_u_tone * d_tone_d_t * cr.derived_scale;
        out.d_r.at(x, y, c) = g_u_tone * d_tone_d_r;
        g_bm += g_u_tone * d_tone_d_bm;
      }
      out.d_beta.at(x, y) = g_bm * d_act;
    }
  }
  return out;
}

std::pair<Image, Image> render_pseudo_pair(const SceneModel& scene,
                                           const CameraView& view) {
  switch (scene.mode) {
    case SceneMode::kFull: {
      RenderTarget flash_rt = render(scene.t_f, view);
      RenderTarget noflash_rt = render(scene.t_n, view);
      return {std::move(flash_rt.color), std::move(noflash_rt.color)};
    }
    case SceneMode::kHardLinear: {
      RenderTarget rt = render(scene.t_n, view);
      const double scale = std::pow(*scene.hard_linear, scene.gamma_exponent);
      Image flash_img = rt.color;
      for (std::size_t i = 0; i < flash_img.size(); ++i) flash_img[i] *= scale;
      return {std::move(flash_img), std::move(rt.color)};
    }
    case SceneMode::kFlashless: {
      RenderTarget rt = render(scene.t_n, view);
      Image copy = rt.color;
      return {std::move(copy), std::move(rt.color)};
    }
  }
  throw invalid_parameter_error("render_pseudo_pair: bad mode");
}

static std::string mode_name(SceneMode m) {
  switch (m) {
    case SceneMode::kFull: return "full";
    case SceneMode::kFlashless: return "flashless";
    case SceneMode::kHardLinear: return "hard_linear";
  }
  return "full";
}

static SceneMode mode_from_name(const std::string& s) {
  if (s == "full") return SceneMode::kFull;
  if (s == "flashless") return SceneMode::kFlashless;
  if (s == "hard_linear") return SceneMode::kHardLinear;
  throw data_error("checkpoint manifest: unknown mode '" + s + "'");
}

void save_checkpoint(const std::string& dir, const SceneModel& scene,
                     int iteration) {
  fs::create_directories(dir);
  json manifest;
  manifest["mode"] = mode_name(scene.mode);
  manifest["gamma_exponent"] = scene.gamma_exponent;
  manifest["hard_linear"] =
      scene.hard_linear ? json(*scene.hard_linear) : json(nullptr);
  manifest["sh_degree"] = scene.t_n.sh_degree;
  manifest["beta_sh_degree"] = scene.beta.sh_degree;
  manifest["iteration"] = iteration;
  std::ofstream mf(fs::path(dir) / "manifest.json", std::ios::binary);
  if (!mf) throw data_error("cannot write checkpoint manifest in " + dir);
  mf << manifest.dump(2) << "\n";

  if (scene.uses_tf_cloud()) {
    write_cloud_ply((fs::path(dir) / "t_f.ply").string(), scene.t_f);
  }
  write_cloud_ply((fs::path(dir) / "t_n.ply").string(), scene.t_n);
  write_cloud_ply((fs::path(dir) / "r.ply").string(), scene.r);
  write_cloud_ply((fs::path(dir) / "beta.ply").string(), scene.beta);
}

SceneModel load_checkpoint(const std::string& dir, int* iteration) {
  std::ifstream mf(fs::path(dir) / "manifest.json", std::ios::binary);
  if (!mf) throw data_error("missing checkpoint manifest in " + dir);
  json manifest;
  try {
    mf >> manifest;
  } catch (const json::parse_error& e) {
    throw data_error(std::string("checkpoint manifest: ") + e.what());
  }
  SceneModel scene;
  scene.mode = mode_from_name(manifest.at("mode").get<std::string>());
  scene.gamma_exponent = manifest.at("gamma_exponent").get<double>();
  if (!manifest.at("hard_linear").is_null()) {
    scene.hard_linear = manifest.at("hard_linear").get<double>();
  }
  if (iteration) *iteration = manifest.value("iteration", 0);

  if (scene.uses_tf_cloud()) {
    scene.t_f = read_cloud_ply((fs::path(dir) / "t_f.ply").string());
  }
  scene.t_n = read_cloud_ply((fs::path(dir) / "t_n.ply").string());
  scene.r = read_cloud_ply((fs::path(dir) / "r.ply").string());
  scene.beta = read_cloud_ply((fs::path(dir) / "beta.ply").string());
  if (!scene.valid()) throw data_error("checkpoint fails scene invariants");
  return scene;
}

}  // namespace beamsplit
