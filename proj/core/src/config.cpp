#include "gscd/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gscd/errors.hpp"

namespace gscd {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ContractError("config " + key + ": cannot parse '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw ContractError("config " + key + ": expected a boolean, got '" + v + "'");
}

std::string num(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <class T>
ConfigKey numeric(std::string name, std::string help, T PipelineConfig::*field) {
  return {name, std::move(help),
          [field, name](PipelineConfig& c, const std::string& v) { c.*field = parse_number<T>(name, v); },
          [field](const PipelineConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return num(c.*field);
            else return std::to_string(c.*field);
          }};
}

ConfigKey path_key(std::string name, std::string help, std::filesystem::path PipelineConfig::*field) {
  return {name, std::move(help),
          [field](PipelineConfig& c, const std::string& v) { c.*field = v; },
          [field](const PipelineConfig& c) { return (c.*field).string(); }};
}

}  // namespace

RenderOptions PipelineConfig::render_options() const {
  RenderOptions o;
  o.threads = threads;
  return o;
}

DiffThresholds PipelineConfig::thresholds() const {
  DiffThresholds t;
  t.mode = eps_mode;
  t.eps1 = eps1;
  t.eps2 = eps2;
  t.quantile = eps_quantile;
  t.quantile_scale = eps_scale;
  t.floor = eps_floor;
  return t;
}

PruneConfig PipelineConfig::prune() const { return {tau, seen_epsilon, weight_floor}; }

SegmentParams PipelineConfig::segmentation() const {
  return {seg_blur, seg_edge, seg_min_area, seg_merge};
}

OptimizerConfig PipelineConfig::optimizer_config() const {
  OptimizerConfig o;
  o.method = optimizer;
  o.step_size = step_size;
  o.position_step_scale = position_step_scale;
  o.iterations = iterations;
  o.batch = batch;
  return o;
}

SeedConfig PipelineConfig::seed_config() const {
  SeedConfig s;
  s.count_per_view = seeds_per_view;
  s.scale_px = seed_scale_px;
  s.opacity = seed_opacity;
  s.hull_fraction = hull_fraction;
  s.seed = seed;
  return s;
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    using C = PipelineConfig;
    std::vector<ConfigKey> k;
    k.push_back({"feature_provider", "rgb | patch | external",
                 [](C& c, const std::string& v) { c.feature_provider = parse_feature_kind(v); },
                 [](const C& c) { return to_string(c.feature_provider); }});
    k.push_back(path_key("features_dir", "FMAP directory for the external provider", &C::features_dir));
    k.push_back({"eps_mode", "fixed | quantile",
                 [](C& c, const std::string& v) { c.eps_mode = parse_threshold_mode(v); },
                 [](const C& c) { return to_string(c.eps_mode); }});
    k.push_back(numeric("eps_quantile", "quantile q of the signed distances", &C::eps_quantile));
    k.push_back(numeric("eps_scale", "multiplier on the quantile thresholds", &C::eps_scale));
    k.push_back(numeric("eps_floor", "minimum |eps| in quantile mode", &C::eps_floor));
    k.push_back(numeric("eps1", "fixed upper threshold (>= 0)", &C::eps1));
    k.push_back(numeric("eps2", "fixed lower threshold (<= 0)", &C::eps2));
    k.push_back(numeric("pca_samples", "max pooled pixels for PCA", &C::pca_samples));
    k.push_back({"vote_mode", "uniform | visibility_aware",
                 [](C& c, const std::string& v) { c.vote_mode = parse_vote_mode(v); },
                 [](const C& c) { return to_string(c.vote_mode); }});
    k.push_back(numeric("tau", "pruning fraction", &C::tau));
    k.push_back(numeric("seen_epsilon", "min contribution for a Gaussian to count as seen", &C::seen_epsilon));
    k.push_back(numeric("weight_floor", "min vote weight to select a Gaussian", &C::weight_floor));
    k.push_back(numeric("recon_weight_floor", "min vote weight for removal and splice",
                        &C::recon_weight_floor));
    k.push_back(numeric("contribution_threshold", "min alpha*T kept in contribution records",
                        &C::contribution_threshold));
    k.push_back(numeric("render_threshold", "accumulated membership for projected masks", &C::render_threshold));
    k.push_back({"validate", "replace masks by the best segmentation proposal (0/1)",
                 [](C& c, const std::string& v) { c.validate = parse_bool("validate", v); },
                 [](const C& c) { return std::string(c.validate ? "1" : "0"); }});
    k.push_back(numeric("min_iou", "min IoU for a proposal to replace a mask", &C::min_iou));
    k.push_back(path_key("proposals_dir", "external proposals (view_<id>/mask_<k>.pgm)", &C::proposals_dir));
    k.push_back(numeric("seg_blur", "proposal pre-blur sigma (px)", &C::seg_blur));
    k.push_back(numeric("seg_edge", "proposal edge threshold", &C::seg_edge));
    k.push_back(numeric("seg_min_area", "smallest proposal region (px)", &C::seg_min_area));
    k.push_back(numeric("seg_merge", "max color step joining neighbor pixels", &C::seg_merge));
    k.push_back({"optimizer", "gd | adam",
                 [](C& c, const std::string& v) { c.optimizer = parse_optimizer_method(v); },
                 [](const C& c) { return to_string(c.optimizer); }});
    k.push_back(numeric("step_size", "color/opacity step", &C::step_size));
    k.push_back(numeric("position_step_scale", "position step relative to step_size", &C::position_step_scale));
    k.push_back(numeric("iterations", "optimization steps", &C::iterations));
    k.push_back(numeric("batch", "views per step", &C::batch));
    k.push_back(numeric("seeds_per_view", "new Gaussians seeded per masked view", &C::seeds_per_view));
    k.push_back(numeric("seed_scale_px", "seed std-dev in pixels", &C::seed_scale_px));
    k.push_back(numeric("seed_opacity", "initial seed opacity", &C::seed_opacity));
    k.push_back(numeric("hull_fraction", "seed multi-view mask consistency", &C::hull_fraction));
    k.push_back(numeric("bg_r", "background red", &C::bg_r));
    k.push_back(numeric("bg_g", "background green", &C::bg_g));
    k.push_back(numeric("bg_b", "background blue", &C::bg_b));
    k.push_back(numeric("threads", "worker threads (0 = hardware)", &C::threads));
    k.push_back(numeric("seed", "random seed", &C::seed));
    return k;
  }();
  return keys;
}

void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : config_keys()) {
    if (k.name == key) {
      k.set(cfg, value);
      return;
    }
  }
  throw ContractError("unknown config key '" + key + "'");
}

PipelineConfig parse_config(const std::string& text, PipelineConfig cfg) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", line_no);
    try {
      set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ContractError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config(os.str(), std::move(base));
}

std::string format_config(const PipelineConfig& cfg) {
  std::ostringstream os;
  for (const auto& k : config_keys()) {
    os << "# " << k.help << "\n" << k.name << " = " << k.get(cfg) << "\n";
  }
  return os.str();
}

void validate_config(const PipelineConfig& c) {
  const auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ContractError("invalid config: " + what);
  };
  const auto unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
  require(c.feature_provider != FeatureKind::external || !c.features_dir.empty(),
          "feature_provider = external needs features_dir");
  require(unit(c.eps_quantile), "eps_quantile must be in [0,1]");
  require(std::isfinite(c.eps_scale) && c.eps_scale > 0.0, "eps_scale must be > 0");
  require(std::isfinite(c.eps_floor) && c.eps_floor >= 0.0, "eps_floor must be >= 0");
  require(std::isfinite(c.eps1) && c.eps1 >= 0.0, "eps1 must be >= 0");
  require(std::isfinite(c.eps2) && c.eps2 <= 0.0, "eps2 must be <= 0");
  require(c.pca_samples >= 2, "pca_samples must be >= 2");
  require(unit(c.tau), "tau must be in [0,1]");
  require(std::isfinite(c.seen_epsilon) && c.seen_epsilon > 0.0, "seen_epsilon must be > 0");
  require(unit(c.weight_floor), "weight_floor must be in [0,1]");
  require(unit(c.recon_weight_floor), "recon_weight_floor must be in [0,1]");
  require(std::isfinite(c.contribution_threshold) && c.contribution_threshold >= 0.0,
          "contribution_threshold must be >= 0");
  require(std::isfinite(c.render_threshold) && c.render_threshold > 0.0 && c.render_threshold <= 1.0,
          "render_threshold must be in (0,1]");
  require(unit(c.min_iou), "min_iou must be in [0,1]");
  require(std::isfinite(c.seg_blur) && c.seg_blur >= 0.0, "seg_blur must be >= 0");
  require(std::isfinite(c.seg_edge) && c.seg_edge > 0.0, "seg_edge must be > 0");
  require(c.seg_min_area >= 1, "seg_min_area must be >= 1");
  require(c.seg_merge > 0.0 && c.seg_merge <= 1.0, "seg_merge must be in (0,1]");
  require(std::isfinite(c.step_size) && c.step_size > 0.0, "step_size must be > 0");
  require(std::isfinite(c.position_step_scale) && c.position_step_scale >= 0.0,
          "position_step_scale must be >= 0");
  require(c.iterations >= 0, "iterations must be >= 0");
  require(c.batch >= 1, "batch must be >= 1");
  require(c.seeds_per_view >= 0, "seeds_per_view must be >= 0");
  require(std::isfinite(c.seed_scale_px) && c.seed_scale_px > 0.0, "seed_scale_px must be > 0");
  require(c.seed_opacity > 0.0 && c.seed_opacity <= 1.0, "seed_opacity must be in (0,1]");
  require(unit(c.hull_fraction), "hull_fraction must be in [0,1]");
  require(unit(c.bg_r) && unit(c.bg_g) && unit(c.bg_b), "background must be in [0,1]");
  require(c.threads >= 0, "threads must be >= 0");
}

}  // namespace gscd
