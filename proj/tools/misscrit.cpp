// misscrit: fit mixtures by EM, compute information criteria, run the
// Monte Carlo risk studies and the divergence decomposition check.
//
// Exit codes: 0 ok, 1 error, 2 degenerate or unconverged fit, 3 too many
// unusable replicates in a study.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include <CLI11.hpp>

#include "misscrit/criteria.hpp"
#include "misscrit/dataset_io.hpp"
#include "misscrit/em.hpp"
#include "misscrit/fisher.hpp"
#include "misscrit/lemma.hpp"
#include "misscrit/serialize.hpp"
#include "misscrit/simulate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace misscrit;

namespace {

constexpr int kExitError = 1;
constexpr int kExitDegenerate = 2;
constexpr int kExitTooManyDegenerate = 3;

struct EmFlags {
  std::optional<double> tol;
  std::optional<int> max_iters;
  std::optional<int> restarts;
  std::optional<std::string> init;
  std::optional<std::uint64_t> seed;

  void add_to(CLI::App* app) {
    app->add_option("--tol", tol, "EM tolerance on per-observation log-likelihood change");
    app->add_option("--max-iters", max_iters, "EM iteration cap");
    app->add_option("--restarts", restarts, "number of EM restarts");
    app->add_option("--init", init, "EM initialization")
        ->check(CLI::IsMember({"true-anchored", "quantile", "random"}));
    app->add_option("--seed", seed, "seed (falls back to $MISSCRIT_SEED)")->envname("MISSCRIT_SEED");
  }

  void apply(EmConfig& cfg) const {
    if (tol) cfg.tol_loglik = *tol;
    if (max_iters) cfg.max_iters = *max_iters;
    if (restarts) cfg.n_restarts = *restarts;
    if (init) cfg.init = parse_init_method(*init);
    if (seed) cfg.seed = *seed;
  }
};

struct LoadedSpec {
  MixtureSpec spec;
  std::optional<Params> anchor;
};

// Builtin selector (sim1:model2 ...) or a JSON spec file, which may carry an
// "anchor" parameter point for true-anchored starts.
LoadedSpec load_spec(const std::string& selector) {
  for (const auto& name : builtin_spec_names()) {
    if (name == selector) {
      BuiltinSpec b = builtin_spec(selector);
      return {b.spec, b.truth};
    }
  }
  std::ifstream in(selector);
  if (!in) throw ParseError("spec '" + selector + "' is neither a builtin selector nor a readable file");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(selector + ": " + e.what());
  }
  LoadedSpec out{spec_from_json(j), std::nullopt};
  if (out.spec.label().empty()) out.spec = MixtureSpec(out.spec.k(), out.spec.variance_classes(), fs::path(selector).stem());
  if (j.contains("anchor")) {
    const json& a = j.at("anchor");
    out.anchor = params_from_json(MixtureSpec::untied(static_cast<int>(a.at("weights").size())), a);
  }
  return out;
}

EmConfig em_config_for(const LoadedSpec& s, const EmFlags& flags) {
  EmConfig cfg;
  cfg.init = InitMethod::Quantile;
  cfg.n_restarts = 5;
  flags.apply(cfg);
  if (cfg.init == InitMethod::TrueAnchored) {
    if (!s.anchor) throw std::invalid_argument("--init true-anchored needs a builtin spec or a spec file with an anchor");
    cfg.anchor = *s.anchor;
  }
  return cfg;
}

void emit(const std::optional<fs::path>& out_dir, const std::string& filename, const std::string& content) {
  if (!out_dir) {
    std::cout << content;
    return;
  }
  fs::create_directories(*out_dir);
  std::ofstream out(*out_dir / filename, std::ios::binary);
  if (!out) throw ParseError("cannot write " + (*out_dir / filename).string());
  out << content;
}

json provenance() { return json{{"tool", "misscrit"}, {"tool_version", tool_version()}}; }

int cmd_fit(const fs::path& data_path, const std::string& spec_sel, const EmFlags& flags,
            const std::optional<fs::path>& out_dir) {
  const IncompleteDataset data = read_incomplete_csv(data_path);
  const LoadedSpec s = load_spec(spec_sel);
  const EmConfig cfg = em_config_for(s, flags);
  FitResult fit;
  try {
    fit = fit_em(data, s.spec, cfg);
  } catch (const AllRestartsDegenerate& e) {
    std::cerr << "misscrit fit: " << e.what() << "\n";
    return kExitDegenerate;
  }
  json j = fit;
  j["config"] = json{{"data", data_path.string()}, {"spec", spec_sel}, {"em", cfg}};
  j["provenance"] = provenance();
  emit(out_dir, "fit.json", j.dump(2) + "\n");
  if (!fit.converged) {
    std::cerr << "misscrit fit: EM did not converge within " << cfg.max_iters << " iterations\n";
    return kExitDegenerate;
  }
  return 0;
}

int cmd_criteria(const fs::path& data_path, const std::vector<std::string>& spec_sels, const EmFlags& flags,
                 PenaltyRoute route, const std::string& format, const std::optional<fs::path>& out_dir) {
  const IncompleteDataset data = read_incomplete_csv(data_path);
  std::vector<CriteriaReport> reports;
  json fits = json::array();
  for (const auto& sel : spec_sels) {
    const LoadedSpec s = load_spec(sel);
    const EmConfig cfg = em_config_for(s, flags);
    FitResult fit;
    try {
      fit = fit_em(data, s.spec, cfg);
      if (!fit.converged) throw DegenerateFit("EM did not converge for " + sel);
      reports.push_back(compute_criteria(fit, bundle(fit.theta_hat, route, &data), data));
    } catch (const AllRestartsDegenerate& e) {
      std::cerr << "misscrit criteria: " << e.what() << "\n";
      return kExitDegenerate;
    } catch (const DegenerateFit& e) {
      std::cerr << "misscrit criteria: " << e.what() << "\n";
      return kExitDegenerate;
    }
    fits.push_back(json{{"model", s.spec.label()}, {"theta_hat", fit.theta_hat}, {"iters", fit.iters}, {"em", cfg}});
  }
  json selected;
  for (Criterion c : kAllCriteria) selected[to_string(c)] = reports[select(reports, c)].model_label;

  std::string text;
  if (format == "json") {
    json j{{"reports", reports}, {"selected", selected}, {"fits", fits}, {"penalty_route", to_string(route)},
           {"data", data_path.string()}, {"provenance", provenance()}};
    j["config"] = json{{"data", data_path.string()}, {"spec", spec_sels}, {"penalty_route", to_string(route)}};
    text = j.dump(2) + "\n";
  } else if (format == "csv") {
    text = criteria_csv_header() + "\n";
    for (const auto& r : reports) text += to_csv_row(r) + "\n";
  } else {
    text = "| " + criteria_csv_header() + " |\n";
    for (char& ch : text) {
      if (ch == ',') ch = '|';
    }
    text += "|---|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& r : reports) {
      std::string row = to_csv_row(r);
      for (char& ch : row) {
        if (ch == ',') ch = '|';
      }
      text += "| " + row + " |\n";
    }
    text += "\nselected:";
    for (auto& [k, v] : selected.items()) text += " " + k + "=" + v.get<std::string>();
    text += "\n";
  }
  emit(out_dir, "criteria." + format, text);
  return 0;
}

int cmd_simulate(const std::optional<std::string>& builtin, const std::optional<fs::path>& config_path,
                 const std::optional<Eigen::Index>& n, const std::optional<int>& b,
                 const std::optional<Eigen::Index>& n_tilde, const std::optional<std::string>& route,
                 const EmFlags& flags, int threads, const fs::path& out_dir, const std::string& format) {
  StudyConfig cfg;
  if (config_path) {
    std::ifstream in(*config_path);
    if (!in) throw ParseError("cannot open " + config_path->string());
    try {
      cfg = study_config_from_json(json::parse(in));
    } catch (const json::exception& e) {
      throw ParseError(config_path->string() + ": " + e.what());
    }
  } else {
    cfg = builtin_study(*builtin);
  }
  if (n) cfg.n = *n;
  if (b) cfg.b = *b;
  if (n_tilde) cfg.n_tilde = *n_tilde;
  if (route) cfg.penalty_route = parse_penalty_route(*route);
  EmFlags study_flags = flags;
  if (flags.seed) cfg.master_seed = *flags.seed;
  study_flags.seed.reset();
  study_flags.apply(cfg.em);
  if (cfg.em.init == InitMethod::TrueAnchored) cfg.em.anchor = cfg.truth;
  cfg.validate();

  int code = 0;
  StudyResult result;
  try {
    result = run_study(cfg, threads);
  } catch (const TooManyDegenerateStudy& e) {
    std::cerr << "misscrit simulate: " << e.what() << "\n";
    result = e.result();
    code = kExitTooManyDegenerate;
  }
  write_study_outputs(out_dir, result);
  if (format == "json") {
    std::cout << tables_json(result).dump(2) << "\n";
  } else if (format == "csv") {
    std::cout << records_csv(result);
  } else {
    std::cout << tables_markdown(result);
  }
  return code;
}

int cmd_lemma(int pairs, std::uint64_t seed) {
  double worst = 0.0;
  for (int i = 0; i < pairs; ++i) {
    const auto g = random_joint(3, 3, derive_seed(seed, static_cast<std::uint64_t>(i), SeedRole::Train));
    const auto f = random_joint(3, 3, derive_seed(seed, static_cast<std::uint64_t>(i), SeedRole::Holdout));
    const auto h = random_joint(3, 3, derive_seed(seed, static_cast<std::uint64_t>(i), SeedRole::Em));
    worst = std::max(worst, lemma1_check(g, f, h).max_residual());
  }
  // g_{z|y} = f_{z|y} with different marginals
  const auto f = random_joint(3, 3, seed);
  const auto g = compose(conditional_z_given_y(f), marginal_y(random_joint(3, 3, seed + 1)));
  const auto collapse = lemma1_check(g, f);
  const double collapse_residual = std::abs(collapse.d_x - collapse.d_y);
  json j{{"pairs", pairs},
         {"seed", seed},
         {"max_residual", worst},
         {"collapse_residual", collapse_residual},
         {"pass", worst <= 1e-12 && collapse_residual <= 1e-12},
         {"provenance", provenance()}};
  std::cout << j.dump(2) << "\n";
  return j["pass"].get<bool>() ? 0 : kExitError;
}

int cmd_sample(const std::string& spec_sel, Eigen::Index n, std::uint64_t seed, bool complete, const fs::path& out) {
  const BuiltinSpec b = builtin_spec(spec_sel.find(':') == std::string::npos ? spec_sel + ":model1" : spec_sel);
  const CompleteDataset data = sample(b.truth, n, seed);
  if (complete) {
    write_csv(out, data);
  } else {
    write_csv(out, data.observed());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model selection criteria for mixtures fitted to incomplete data"};
  app.set_version_flag("--version", tool_version());
  app.require_subcommand(1);

  EmFlags em_flags;
  std::string data_path;
  std::vector<std::string> specs;
  std::optional<std::string> out_dir;
  std::string format = "json";
  std::string route = "expected";

  auto* fit = app.add_subcommand("fit", "fit one spec by EM and write FitResult JSON");
  fit->add_option("--data", data_path, "CSV with header y or y,z")->required();
  fit->add_option("--spec", specs, "builtin selector (sim1:model2) or spec JSON file")->required()->expected(1);
  fit->add_option("--out", out_dir, "output directory (default: stdout)");
  em_flags.add_to(fit);

  auto* crit = app.add_subcommand("criteria", "fit each spec and report AIC, TIC, PDIO, AIC_cd, AIC_x;y");
  crit->add_option("--data", data_path, "CSV with header y or y,z")->required();
  crit->add_option("--spec", specs, "builtin selectors or spec JSON files")->required()->expected(1, -1);
  crit->add_option("--penalty-route", route, "expected or empirical information")
      ->check(CLI::IsMember({"expected", "empirical"}));
  crit->add_option("--format", format, "json, csv or md")->check(CLI::IsMember({"json", "csv", "md"}));
  crit->add_option("--out", out_dir, "output directory (default: stdout)");
  em_flags.add_to(crit);

  std::optional<std::string> builtin;
  std::optional<std::string> config_path;
  std::optional<Eigen::Index> n, n_tilde;
  std::optional<int> b;
  std::optional<std::string> sim_route;
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::string sim_format = "md";
  std::string sim_out = "study_out";
  auto* sim = app.add_subcommand("simulate", "run a Monte Carlo risk study");
  auto* builtin_opt = sim->add_option("--builtin", builtin, "sim1 or sim2")->check(CLI::IsMember({"sim1", "sim2"}));
  auto* config_opt = sim->add_option("--config", config_path, "study config JSON");
  builtin_opt->excludes(config_opt);
  sim->add_option("--n", n, "training sample size");
  sim->add_option("--b", b, "replicate count");
  sim->add_option("--n-tilde", n_tilde, "holdout sample size");
  sim->add_option("--penalty-route", sim_route, "expected or empirical information")
      ->check(CLI::IsMember({"expected", "empirical"}));
  sim->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  sim->add_option("--out", sim_out, "directory for records.csv, tables.json, tables.md");
  sim->add_option("--format", sim_format, "what to print: md, json or csv")->check(CLI::IsMember({"json", "csv", "md"}));
  em_flags.add_to(sim);

  int pairs = 100;
  std::uint64_t lemma_seed = 1;
  auto* lemma = app.add_subcommand("lemma-check", "check the divergence decomposition on random discrete pairs");
  lemma->add_option("--pairs", pairs, "number of random pairs")->check(CLI::PositiveNumber);
  lemma->add_option("--seed", lemma_seed, "seed")->envname("MISSCRIT_SEED");

  std::string sample_spec = "sim1";
  Eigen::Index sample_n = 1000;
  std::uint64_t sample_seed = 1;
  bool complete = false;
  std::string sample_out;
  auto* smp = app.add_subcommand("sample", "draw a dataset from a builtin study's truth");
  smp->add_option("--builtin", sample_spec, "sim1 or sim2");
  smp->add_option("--n", sample_n, "sample size");
  smp->add_option("--seed", sample_seed, "seed")->envname("MISSCRIT_SEED");
  smp->add_flag("--complete", complete, "include the z column");
  smp->add_option("--out", sample_out, "output CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fit) return cmd_fit(data_path, specs.front(), em_flags, out_dir ? std::optional<fs::path>(*out_dir) : std::nullopt);
    if (*crit) {
      return cmd_criteria(data_path, specs, em_flags, parse_penalty_route(route), format,
                          out_dir ? std::optional<fs::path>(*out_dir) : std::nullopt);
    }
    if (*sim) {
      if (!builtin && !config_path) throw std::invalid_argument("simulate needs --builtin or --config");
      return cmd_simulate(builtin, config_path ? std::optional<fs::path>(*config_path) : std::nullopt, n, b, n_tilde,
                          sim_route, em_flags, threads, sim_out, sim_format);
    }
    if (*lemma) return cmd_lemma(pairs, lemma_seed);
    if (*smp) return cmd_sample(sample_spec, sample_n, sample_seed, complete, sample_out);
  } catch (const std::exception& e) {
    std::cerr << "misscrit: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
