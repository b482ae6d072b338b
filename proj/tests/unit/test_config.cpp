#include <fstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "gscd/config.hpp"
#include "gscd/errors.hpp"

using namespace gscd;

TEST(Config, DefaultsValidate) { EXPECT_NO_THROW(validate_config(PipelineConfig{})); }

TEST(Config, FormatParseRoundTrip) {
  PipelineConfig c;
  c.eps_quantile = 0.125;
  c.tau = 1.0 / 3.0;
  c.vote_mode = VoteMode::uniform;
  c.validate = false;
  c.optimizer = OptimizerMethod::adam;
  c.proposals_dir = "some/dir";
  c.seed = 18446744073709551615ull;
  const std::string text = format_config(c);
  const PipelineConfig back = parse_config(text);
  EXPECT_EQ(format_config(back), text);
  EXPECT_EQ(back.tau, c.tau);
  EXPECT_EQ(back.seed, c.seed);
  EXPECT_EQ(back.vote_mode, VoteMode::uniform);
  EXPECT_FALSE(back.validate);
}

TEST(Config, EveryKeyIsSettableAndReadable) {
  for (const auto& k : config_keys()) {
    PipelineConfig c;
    const std::string v = k.get(c);
    EXPECT_NO_THROW(set_config_value(c, k.name, v)) << k.name;
    EXPECT_EQ(k.get(c), v) << k.name;
    EXPECT_FALSE(k.help.empty()) << k.name;
  }
}

TEST(Config, CommentsBlankLinesAndWhitespace) {
  const auto c = parse_config("# header\n\n  tau =  0.25   # trailing\n\tthreads=4\n");
  EXPECT_EQ(c.tau, 0.25);
  EXPECT_EQ(c.threads, 4);
}

TEST(Config, BaseValuesSurviveUnlessOverridden) {
  PipelineConfig base;
  base.min_iou = 0.9;
  base.tau = 0.1;
  const auto c = parse_config("tau = 0.7\n", base);
  EXPECT_EQ(c.min_iou, 0.9);
  EXPECT_EQ(c.tau, 0.7);
}

TEST(Config, ErrorsCarryLineNumbers) {
  const auto line_of = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return -1;
  };
  EXPECT_EQ(line_of("tau = 0.5\nno equals sign\n"), 2);
  EXPECT_EQ(line_of("\n\nbogus_key = 1\n"), 3);
  EXPECT_EQ(line_of("tau = half\n"), 1);
  EXPECT_EQ(line_of("iterations = 2.5\n"), 1);
  EXPECT_EQ(line_of("validate = maybe\n"), 1);
  EXPECT_EQ(line_of("vote_mode = sometimes\n"), 1);
  PipelineConfig c;
  EXPECT_THROW(set_config_value(c, "nope", "1"), ContractError);
}

TEST(Config, LoadFromFile) {
  const auto dir = fixture::temp_dir("cfg");
  {
    std::ofstream out(dir / "a.cfg");
    out << "seg_min_area = 7\n";
  }
  EXPECT_EQ(load_config(dir / "a.cfg").seg_min_area, 7);
  EXPECT_THROW(load_config(dir / "missing.cfg"), IoError);
  std::filesystem::remove_all(dir);
}

TEST(Config, ValidationRejectsOutOfRangeValues) {
  const std::pair<const char*, const char*> bad[] = {
      {"eps_quantile", "1.5"}, {"eps_scale", "0"},       {"eps_floor", "-1"},
      {"eps1", "-0.1"},        {"eps2", "0.1"},          {"pca_samples", "1"},
      {"tau", "-0.01"},        {"tau", "1.01"},          {"seen_epsilon", "0"},
      {"weight_floor", "2"},   {"render_threshold", "0"}, {"min_iou", "1.1"},
      {"seg_edge", "0"},       {"seg_min_area", "0"},    {"seg_merge", "0"},
      {"step_size", "0"},      {"iterations", "-1"},     {"batch", "0"},
      {"seed_scale_px", "0"},  {"seed_opacity", "0"},    {"hull_fraction", "1.5"},
      {"bg_r", "1.5"},         {"threads", "-2"},        {"feature_provider", "external"}};
  for (const auto& [key, value] : bad) {
    PipelineConfig c;
    set_config_value(c, key, value);
    EXPECT_THROW(validate_config(c), ContractError) << key << " = " << value;
  }
  PipelineConfig nan;
  nan.tau = std::nan("");
  EXPECT_THROW(validate_config(nan), ContractError);
}

TEST(Config, DerivedStructsFollowTheFields) {
  PipelineConfig c;
  c.tau = 0.3;
  c.weight_floor = 0.2;
  c.seeds_per_view = 17;
  c.iterations = 9;
  c.bg_g = 0.5;
  EXPECT_EQ(c.prune().tau, 0.3);
  EXPECT_EQ(c.prune().weight_floor, 0.2);
  EXPECT_EQ(c.seed_config().count_per_view, 17);
  EXPECT_EQ(c.optimizer_config().iterations, 9);
  EXPECT_EQ(c.background(), Rgb(0, 0.5, 0));
}
