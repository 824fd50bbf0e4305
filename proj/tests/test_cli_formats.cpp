#include <doctest.h>

#include "focal/config.hpp"
#include "focal/errors.hpp"

using namespace focal;

TEST_SUITE_BEGIN("formats");

TEST_CASE("focal config: canonical text round trip") {
  FocalConfig cfg;
  cfg.metapaths = {{"target-anchor", "anchor-target"}, {"target-anchor"}};
  cfg.seed = 42;
  cfg.lambda = 0.1;
  FocalConfig back = parse_focal_config(cfg.to_text());
  CHECK(back.hidden_dim == cfg.hidden_dim);
  CHECK(back.seed == 42);
  CHECK(back.lambda == 0.1);
  CHECK(back.metapaths == cfg.metapaths);
  CHECK(back.asl.gamma_neg == 4.0);
  CHECK(back.to_text() == cfg.to_text());
}

TEST_CASE("focal config: defaults match the published hyperparameters") {
  FocalConfig cfg;
  CHECK(cfg.hidden_dim == 16);
  CHECK(cfg.out_dim == 16);
  CHECK(cfg.num_layers == 2);
  CHECK(cfg.coa_heads == 8);
  CHECK(cfg.aoa_heads == 2);
  CHECK(cfg.dropout == 0.5);
  CHECK(cfg.lr == 0.003);
  CHECK(cfg.weight_decay == 0.0005);
  CHECK(cfg.batch_size == 5120);
  CHECK(cfg.patience == 60);
  CHECK(cfg.max_epoch == 500);
  CHECK(cfg.fanout == 5);
  CHECK(cfg.lambda == 0.05);
  CHECK(cfg.threshold == 0.5);
}

TEST_CASE("focal config: unknown keys and bad values rejected") {
  CHECK_THROWS_WITH_AS(
      parse_focal_config("metapaths = [[\"a\"]]\nbogus_key = 3\n"),
      doctest::Contains("unknown config key"), parse_error);
  CHECK_THROWS_AS(parse_focal_config("hidden_dim = -3\nmetapaths = [[\"a\"]]\n"), parse_error);
  CHECK_THROWS_AS(parse_focal_config("metapaths = not-json\n"), parse_error);
  CHECK_THROWS_AS(parse_focal_config("metapaths = [[]]\n"), parse_error);
  CHECK_THROWS_AS(parse_focal_config("hidden_dim\n"), parse_error);
}

TEST_CASE("focal config: validation rules") {
  FocalConfig cfg;
  cfg.metapaths = {{"a"}};
  CHECK_NOTHROW(cfg.validate());
  SUBCASE("head divisibility") {
    cfg.coa_heads = 3;
    CHECK_THROWS_AS(cfg.validate(), validation_error);
  }
  SUBCASE("out_dim must equal hidden_dim") {
    cfg.out_dim = 8;
    CHECK_THROWS_AS(cfg.validate(), validation_error);
  }
  SUBCASE("dropout range") {
    cfg.dropout = 1.0;
    CHECK_THROWS_AS(cfg.validate(), validation_error);
  }
  SUBCASE("lambda nonnegative") {
    cfg.lambda = -0.1;
    CHECK_THROWS_AS(cfg.validate(), validation_error);
  }
  SUBCASE("metapaths required") {
    cfg.metapaths.clear();
    CHECK_THROWS_AS(cfg.validate(), validation_error);
  }
  SUBCASE("asl clip range") {
    cfg.asl.clip = 1.0;
    CHECK_THROWS_AS(cfg.validate(), validation_error);
  }
}

TEST_CASE("synth config: round trip, comments, and validation") {
  SynthConfig cfg;
  cfg.seed = 9;
  cfg.rare_rate = 0.25;
  SynthConfig back = parse_synth_config(cfg.to_text() + "# trailing comment\n");
  CHECK(back.seed == 9);
  CHECK(back.rare_rate == 0.25);
  CHECK_THROWS_AS(parse_synth_config("rare_rate = 2.0\n"), validation_error);
  CHECK_THROWS_AS(parse_synth_config("nope = 1\n"), parse_error);
}

TEST_CASE("config hash is stable and content-sensitive") {
  const std::string a = "x = 1\n";
  CHECK(config_hash(a) == config_hash(a));
  CHECK(config_hash(a) != config_hash("x = 2\n"));
  CHECK(config_hash(a).size() == 16);
}

TEST_SUITE_END();
