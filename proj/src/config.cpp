#include "plaque/config.hpp"

#include <algorithm>

namespace plaque {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; });
    if (!known) throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

namespace {

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void to_json(json& j, const PhantomSpec& s) {
  j = json{{"master_seed", s.master_seed},
           {"patients", s.patients},
           {"dims", {s.dims.nx, s.dims.ny, s.dims.nz}},
           {"spacing", s.spacing},
           {"path_length", s.path_length},
           {"curvature_min", s.curvature_min},
           {"curvature_max", s.curvature_max},
           {"out_of_plane", s.out_of_plane},
           {"r_ref", s.r_ref},
           {"wall_thickness", s.wall_thickness},
           {"lesions_min", s.lesions_min},
           {"lesions_max", s.lesions_max},
           {"extent_min", s.extent_min},
           {"extent_max", s.extent_max},
           {"end_margin", s.end_margin},
           {"mild_min", s.mild_min},
           {"mild_max", s.mild_max},
           {"severe_min", s.severe_min},
           {"severe_max", s.severe_max},
           {"severe_probability", s.severe_probability},
           {"intensity",
            {{"background", s.intensity.background},
             {"wall", s.intensity.wall},
             {"lumen", s.intensity.lumen},
             {"calcified", s.intensity.calcified},
             {"lipid", s.intensity.lipid}}},
           {"noise_sigma", s.noise_sigma},
           {"centerline_step", s.centerline_step},
           {"rule",
            {{"severe_degree", s.rule.severe_degree},
             {"moderate_degree", s.rule.moderate_degree},
             {"label_noise", s.rule.label_noise}}}};
}

void from_json(const json& j, PhantomSpec& s) {
  check_keys(j,
             {"master_seed", "patients", "dims", "spacing", "path_length", "curvature_min", "curvature_max",
              "out_of_plane", "r_ref", "wall_thickness", "lesions_min", "lesions_max", "extent_min", "extent_max",
              "end_margin", "mild_min", "mild_max", "severe_min", "severe_max", "severe_probability", "intensity",
              "noise_sigma", "centerline_step", "rule"},
             "phantom");
  read(j, "master_seed", s.master_seed);
  read(j, "patients", s.patients);
  if (j.contains("dims")) {
    const auto d = j.at("dims").get<std::vector<int>>();
    if (d.size() != 3) throw ConfigError("phantom.dims: expected three integers");
    s.dims = {d[0], d[1], d[2]};
  }
  read(j, "spacing", s.spacing);
  read(j, "path_length", s.path_length);
  read(j, "curvature_min", s.curvature_min);
  read(j, "curvature_max", s.curvature_max);
  read(j, "out_of_plane", s.out_of_plane);
  read(j, "r_ref", s.r_ref);
  read(j, "wall_thickness", s.wall_thickness);
  read(j, "lesions_min", s.lesions_min);
  read(j, "lesions_max", s.lesions_max);
  read(j, "extent_min", s.extent_min);
  read(j, "extent_max", s.extent_max);
  read(j, "end_margin", s.end_margin);
  read(j, "mild_min", s.mild_min);
  read(j, "mild_max", s.mild_max);
  read(j, "severe_min", s.severe_min);
  read(j, "severe_max", s.severe_max);
  read(j, "severe_probability", s.severe_probability);
  if (j.contains("intensity")) {
    const auto& i = j.at("intensity");
    check_keys(i, {"background", "wall", "lumen", "calcified", "lipid"}, "phantom.intensity");
    read(i, "background", s.intensity.background);
    read(i, "wall", s.intensity.wall);
    read(i, "lumen", s.intensity.lumen);
    read(i, "calcified", s.intensity.calcified);
    read(i, "lipid", s.intensity.lipid);
  }
  read(j, "noise_sigma", s.noise_sigma);
  read(j, "centerline_step", s.centerline_step);
  if (j.contains("rule")) {
    const auto& r = j.at("rule");
    check_keys(r, {"severe_degree", "moderate_degree", "label_noise"}, "phantom.rule");
    read(r, "severe_degree", s.rule.severe_degree);
    read(r, "moderate_degree", s.rule.moderate_degree);
    read(r, "label_noise", s.rule.label_noise);
  }
}

namespace radiomics {

void to_json(json& j, const RadiomicsConfig& c) {
  j = json{{"original", c.original},
           {"log_sigmas", c.log_sigmas},
           {"wavelet", c.wavelet},
           {"wavelet_lll", c.wavelet_lll},
           {"shape", c.shape},
           {"first_order", c.first_order},
           {"glcm", c.glcm},
           {"glrlm", c.glrlm},
           {"discretization",
            {{"mode", c.discretization.mode == DiscretizationSpec::Mode::FixedWidth ? "fixed_width" : "fixed_count"},
             {"width", c.discretization.width},
             {"count", c.discretization.count}}}};
}

void from_json(const json& j, RadiomicsConfig& c) {
  check_keys(j, {"original", "log_sigmas", "wavelet", "wavelet_lll", "shape", "first_order", "glcm", "glrlm",
                 "discretization"},
             "radiomics");
  read(j, "original", c.original);
  read(j, "log_sigmas", c.log_sigmas);
  read(j, "wavelet", c.wavelet);
  read(j, "wavelet_lll", c.wavelet_lll);
  read(j, "shape", c.shape);
  read(j, "first_order", c.first_order);
  read(j, "glcm", c.glcm);
  read(j, "glrlm", c.glrlm);
  if (j.contains("discretization")) {
    const auto& d = j.at("discretization");
    check_keys(d, {"mode", "width", "count"}, "radiomics.discretization");
    if (d.contains("mode")) {
      const auto m = d.at("mode").get<std::string>();
      if (m == "fixed_width") c.discretization.mode = DiscretizationSpec::Mode::FixedWidth;
      else if (m == "fixed_count") c.discretization.mode = DiscretizationSpec::Mode::FixedCount;
      else throw ConfigError("radiomics.discretization.mode: expected fixed_width or fixed_count");
    }
    read(d, "width", c.discretization.width);
    read(d, "count", c.discretization.count);
  }
}

}  // namespace radiomics

namespace gbt {

void to_json(json& j, const BoostConfig& c) {
  j = json{{"rounds", c.rounds},
           {"max_depth", c.max_depth},
           {"eta", c.eta},
           {"lambda", c.lambda},
           {"gamma", c.gamma},
           {"min_child_hessian", c.min_child_hessian},
           {"feature_subsample", c.feature_subsample}};
}

void from_json(const json& j, BoostConfig& c) {
  check_keys(j, {"rounds", "max_depth", "eta", "lambda", "gamma", "min_child_hessian", "feature_subsample"}, "boost");
  read(j, "rounds", c.rounds);
  read(j, "max_depth", c.max_depth);
  read(j, "eta", c.eta);
  read(j, "lambda", c.lambda);
  read(j, "gamma", c.gamma);
  read(j, "min_child_hessian", c.min_child_hessian);
  read(j, "feature_subsample", c.feature_subsample);
}

}  // namespace gbt

}  // namespace plaque
