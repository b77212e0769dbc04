#include <doctest.h>

#include <fstream>
#include <sstream>

#include "misscrit/serialize.hpp"
#include "test_support.hpp"

using namespace misscrit;
using nlohmann::json;
namespace fs = std::filesystem;

TEST_CASE("spec JSON uses 1-based classes and round trips") {
  const MixtureSpec spec(3, {{0, 2}, {1}}, "m");
  const json j = spec;
  CHECK(j.at("k") == 3);
  CHECK(j.at("variance_classes") == json::parse("[[1,3],[2]]"));
  CHECK(j.at("label") == "m");
  CHECK(spec_from_json(j) == spec);
  CHECK(spec_from_json(json::parse(R"({"k": 2, "variance_classes": [[1, 2]], "label": "tied"})")).free_dim() == 4);
}

TEST_CASE("invalid spec JSON is a parse error") {
  CHECK_THROWS_AS(spec_from_json(json::parse(R"({"variance_classes": [[1]]})")), ParseError);
  CHECK(spec_from_json(json::parse(R"({"k": 2})")) == MixtureSpec::untied(2));  // classes default to untied
  CHECK_THROWS_AS(spec_from_json(json::parse(R"({"k": 2, "variance_classes": [[0, 1]]})")), std::exception);
  CHECK_THROWS_AS(read_spec_file("/nonexistent/spec.json"), ParseError);
}

TEST_CASE("params round trip through JSON") {
  const Params theta = testing::sim2_truth();
  const json j = theta;
  const Params back = params_from_json(theta.spec, j);
  CHECK(pack(back) == pack(theta));
  const Params tied = params_from_json(MixtureSpec::fully_tied(2),
                                       json::parse(R"({"weights": [0.6, 0.4], "means": [-1, 1], "variances": [0.49, 0.49]})"));
  CHECK(tied.class_variances.size() == 1);
  CHECK_THROWS_AS(params_from_json(MixtureSpec::fully_tied(2),
                                   json::parse(R"({"weights": [0.6, 0.4], "means": [-1, 1], "variances": [0.4, 0.49]})")),
                  ConstraintViolation);
}

TEST_CASE("study config round trips through JSON") {
  StudyConfig cfg = builtin_sim2(300, 7, 600, 5);
  cfg.penalty_route = PenaltyRoute::Empirical;
  const StudyConfig back = study_config_from_json(json(cfg));
  CHECK(json(back) == json(cfg));

  const StudyConfig over = study_config_from_json(json::parse(R"({"builtin": "sim1", "n": 250, "b": 3, "reference": "model2"})"));
  CHECK(over.n == 250);
  CHECK(over.b == 3);
  CHECK(over.reference == 1);
  CHECK(over.n_tilde == 5000);
  CHECK_THROWS_AS(study_config_from_json(json::parse(R"({"builtin": "sim1", "reference": "nope"})")), ParseError);
  CHECK_THROWS_AS(study_config_from_json(json::parse(R"({"builtin": "sim1", "b": 1})")), ParseError);
}

TEST_CASE("study outputs carry the schema, tool version and config") {
  const StudyResult r = run_study(builtin_sim1(150, 2, 300, 3));
  const std::string csv = records_csv(r);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "# schema_version: 1");
  std::getline(in, line);
  CHECK(line == "# tool_version: " + tool_version());
  std::getline(in, line);
  CHECK(line.rfind("# config: ", 0) == 0);
  CHECK(json::parse(line.substr(10)) == json(r.config));
  std::getline(in, line);
  CHECK(line.rfind("replicate,model,d,status", 0) == 0);
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 4);

  const json t = tables_json(r);
  CHECK(t.at("schema_version") == kStudySchemaVersion);
  CHECK(t.at("config").at("master_seed") == 3);
  CHECK(t.at("tables").at("candidates").size() == 2);

  const fs::path dir = fs::temp_directory_path() / "misscrit_serialize_test";
  fs::remove_all(dir);
  write_study_outputs(dir, r);
  for (const char* f : {"records.csv", "tables.json", "tables.md"}) CHECK(fs::exists(dir / f));
  std::ifstream rec(dir / "records.csv");
  std::stringstream ss;
  ss << rec.rdbuf();
  CHECK(ss.str() == csv);
  fs::remove_all(dir);
}

TEST_CASE("fit and bundle JSON shapes") {
  const auto b = builtin_spec("sim1:model1");
  const IncompleteDataset data = sample(b.truth, 300, 2).observed();
  EmConfig cfg;
  cfg.anchor = b.truth;
  const FitResult fit = fit_em(data, b.spec, cfg);
  const json j = fit;
  for (const char* key : {"theta_hat", "loglik", "iters", "converged", "degenerate", "loglik_trace"}) {
    CHECK(j.contains(key));
  }
  CHECK(j.at("loglik").get<double>() == fit.loglik);
  const json bj = bundle(fit.theta_hat, PenaltyRoute::Empirical, &data);
  CHECK(bj.at("i_x").size() == 4);
  CHECK(bj.at("i_x").at(0).size() == 4);
  CHECK(bj.contains("hx_hat"));
}
