#include "misscrit/serialize.hpp"

#include <fstream>
#include <sstream>

#include "misscrit/dataset_io.hpp"

namespace misscrit {

using nlohmann::json;

std::string tool_version() { return MISSCRIT_VERSION; }

namespace {

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw ParseError(std::string(what) + " must be an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ParseError(std::string(what) + " must be an array of numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

json matrix_json(const SymMatrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json mean_se_json(const MeanSe& m) { return json{{"mean", m.mean}, {"se", m.se}, {"count", m.count}}; }

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

void to_json(json& j, const MixtureSpec& spec) {
  json classes = json::array();
  for (const auto& c : spec.variance_classes()) {
    json members = json::array();
    for (int i : c) members.push_back(i + 1);
    classes.push_back(std::move(members));
  }
  j = json{{"k", spec.k()}, {"variance_classes", classes}, {"label", spec.label()}, {"d", spec.free_dim()}};
}

MixtureSpec spec_from_json(const json& j) {
  try {
    const int k = j.at("k").get<int>();
    std::vector<std::vector<int>> classes;
    if (j.contains("variance_classes")) {
      for (const auto& c : j.at("variance_classes")) {
        std::vector<int> members;
        for (const auto& i : c) members.push_back(i.get<int>() - 1);
        classes.push_back(std::move(members));
      }
    } else {
      for (int i = 0; i < k; ++i) classes.push_back({i});
    }
    return MixtureSpec(k, std::move(classes), get_or<std::string>(j, "label", ""));
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid spec JSON: ") + e.what());
  }
}

MixtureSpec read_spec_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  try {
    return spec_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void to_json(json& j, const Params& theta) {
  j = json{{"weights", vector_json(theta.weights)},
           {"means", vector_json(theta.means)},
           {"class_variances", vector_json(theta.class_variances)},
           {"variances", vector_json(theta.component_variances())}};
}

Params params_from_json(const MixtureSpec& spec, const json& j) {
  try {
    const Vector w = vector_from_json(j.at("weights"), "weights");
    const Vector m = vector_from_json(j.at("means"), "means");
    if (j.contains("class_variances")) {
      Params theta{spec, w, m, vector_from_json(j.at("class_variances"), "class_variances")};
      theta.validate();
      return theta;
    }
    return make_params(spec, w, m, vector_from_json(j.at("variances"), "variances"));
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid parameter JSON: ") + e.what());
  }
}

void to_json(json& j, const EmConfig& cfg) {
  j = json{{"max_iters", cfg.max_iters},
           {"tol_loglik", cfg.tol_loglik},
           {"n_restarts", cfg.n_restarts},
           {"init", to_string(cfg.init)},
           {"seed", cfg.seed}};
  if (cfg.anchor) j["anchor"] = *cfg.anchor;
}

void to_json(json& j, const FitResult& fit) {
  j = json{{"spec", fit.theta_hat.spec},
           {"theta_hat", fit.theta_hat},
           {"loglik", fit.loglik},
           {"iters", fit.iters},
           {"converged", fit.converged},
           {"degenerate", fit.degenerate},
           {"fixed_point_residual", fit.fixed_point_residual},
           {"loglik_trace", fit.loglik_trace}};
}

void to_json(json& j, const FisherBundle& b) {
  j = json{{"at", b.at},
           {"i_x", matrix_json(b.i_x)},
           {"i_y", matrix_json(b.i_y)},
           {"i_zy", matrix_json(b.i_zy)},
           {"penalty_route", to_string(b.route)},
           {"penalty_trace", b.penalty_trace}};
  if (b.g_hat) j["g_hat"] = matrix_json(*b.g_hat);
  if (b.h_hat) j["h_hat"] = matrix_json(*b.h_hat);
  if (b.hx_hat) j["hx_hat"] = matrix_json(*b.hx_hat);
}

void to_json(json& j, const CriteriaReport& r) {
  j = json{{"model", r.model_label},
           {"d", r.d},
           {"loglik", r.loglik},
           {"q", r.q_at_hat},
           {"penalty_trace", r.penalty_trace},
           {"penalty_route", to_string(r.penalty_route)},
           {"aic", r.aic},
           {"tic", r.tic},
           {"pdio", r.pdio},
           {"aic_cd", r.aic_cd},
           {"aic_xy", r.aic_xy},
           {"riskhat_xy_minus_entropy", r.riskhat_xy_minus_entropy}};
}

void to_json(json& j, const StudyConfig& cfg) {
  json cands = json::array();
  for (const auto& c : cfg.candidates) cands.push_back(c);
  j = json{{"name", cfg.name},
           {"truth", cfg.truth},
           {"candidates", cands},
           {"reference", cfg.candidates.at(cfg.reference).label()},
           {"n", cfg.n},
           {"n_tilde", cfg.n_tilde},
           {"b", cfg.b},
           {"master_seed", cfg.master_seed},
           {"penalty_route", to_string(cfg.penalty_route)},
           {"em", cfg.em}};
}

void to_json(json& j, const MeanSe& m) { j = mean_se_json(m); }

StudyConfig study_config_from_json(const json& j) {
  try {
    StudyConfig cfg;
    if (j.contains("builtin")) cfg = builtin_study(j.at("builtin").get<std::string>());
    cfg.name = get_or<std::string>(j, "name", cfg.name);
    if (j.contains("truth")) {
      const json& t = j.at("truth");
      const auto k = static_cast<int>(t.at("weights").size());
      cfg.truth = params_from_json(MixtureSpec::untied(k, "truth"), t);
      cfg.em.anchor = cfg.truth;
    }
    if (j.contains("candidates")) {
      cfg.candidates.clear();
      for (const auto& c : j.at("candidates")) cfg.candidates.push_back(spec_from_json(c));
    }
    if (j.contains("reference")) {
      const json& r = j.at("reference");
      if (r.is_number_integer()) {
        cfg.reference = r.get<std::size_t>();
      } else {
        const auto label = r.get<std::string>();
        bool found = false;
        for (std::size_t i = 0; i < cfg.candidates.size(); ++i) {
          if (cfg.candidates[i].label() == label) {
            cfg.reference = i;
            found = true;
          }
        }
        if (!found) throw ParseError("reference '" + label + "' is not a candidate label");
      }
    }
    cfg.n = get_or<Eigen::Index>(j, "n", cfg.n);
    cfg.n_tilde = get_or<Eigen::Index>(j, "n_tilde", cfg.n_tilde);
    cfg.b = get_or<int>(j, "b", cfg.b);
    cfg.master_seed = get_or<std::uint64_t>(j, "master_seed", cfg.master_seed);
    if (j.contains("penalty_route")) cfg.penalty_route = parse_penalty_route(j.at("penalty_route").get<std::string>());
    if (j.contains("em")) {
      const json& e = j.at("em");
      cfg.em.max_iters = get_or<int>(e, "max_iters", cfg.em.max_iters);
      cfg.em.tol_loglik = get_or<double>(e, "tol_loglik", cfg.em.tol_loglik);
      cfg.em.n_restarts = get_or<int>(e, "n_restarts", cfg.em.n_restarts);
      if (e.contains("init")) cfg.em.init = parse_init_method(e.at("init").get<std::string>());
    }
    if (cfg.em.init == InitMethod::TrueAnchored) cfg.em.anchor = cfg.truth;
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid study config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("invalid study config: ") + e.what());
  }
}

void to_json(json& j, const StudyTables& t) {
  json cands = json::array();
  for (const auto& c : t.candidates) {
    json crit;
    for (std::size_t ci = 0; ci < kAllCriteria.size(); ++ci) {
      crit[to_string(kAllCriteria[ci])] = mean_se_json(c.delta_criteria[ci]);
    }
    cands.push_back(json{{"model", c.label},
                         {"d", c.d},
                         {"correctly_specified", c.correctly_specified},
                         {"excluded", c.excluded},
                         {"delta_criteria", crit},
                         {"two_n_delta_risk_yy", mean_se_json(c.risk_yy)},
                         {"two_n_delta_risk_xy", mean_se_json(c.risk_xy)}});
  }
  json crits = json::array();
  for (const auto& c : t.criteria) {
    crits.push_back(json{{"criterion", to_string(c.criterion)},
                         {"selection_counts", c.selection_counts},
                         {"selected_two_n_delta_risk_yy", mean_se_json(c.selected_risk_yy)},
                         {"selected_two_n_delta_risk_xy", mean_se_json(c.selected_risk_xy)}});
  }
  j = json{{"effective_b", t.effective_b},
           {"excluded_replicates", t.excluded_replicates},
           {"candidates", cands},
           {"criteria", crits}};
}

json tables_json(const StudyResult& r) {
  return json{{"schema_version", kStudySchemaVersion},
              {"tool_version", tool_version()},
              {"config", r.config},
              {"reference", r.config.candidates[r.config.reference].label()},
              {"tables", r.tables}};
}

namespace {

std::string fmt(double v, int prec = 3) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(prec);
  os << v;
  return os.str();
}

std::string cell(const MeanSe& m) { return fmt(m.mean) + " (" + fmt(m.se) + ")"; }

}  // namespace

std::string tables_markdown(const StudyResult& r) {
  const StudyConfig& cfg = r.config;
  const StudyTables& t = r.tables;
  const std::string ref = cfg.candidates[cfg.reference].label();
  std::ostringstream os;
  os << "# Study " << cfg.name << "\n\n";
  os << "n = " << cfg.n << ", n_tilde = " << cfg.n_tilde << ", B = " << cfg.b << " (" << t.effective_b
     << " used, " << t.excluded_replicates << " excluded), seed = " << cfg.master_seed
     << ", penalty route = " << to_string(cfg.penalty_route) << ", tool " << tool_version() << "\n\n";

  os << "## Expected differences relative to " << ref << " (standard errors in parentheses)\n\n";
  os << "| model | d | E(dAIC) | E(dTIC) | E(dPDIO) | E(dAIC_cd) | E(dAIC_xy) | 2n d risk_yy | 2n d risk_xy |\n";
  os << "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& c : t.candidates) {
    os << "| " << c.label << (c.correctly_specified ? "*" : "") << " | " << c.d;
    for (const auto& m : c.delta_criteria) os << " | " << cell(m);
    os << " | " << cell(c.risk_yy) << " | " << cell(c.risk_xy) << " |\n";
  }
  os << "\n\\* correctly specified\n\n";

  os << "## Selection frequencies\n\n| criterion |";
  for (const auto& c : t.candidates) os << ' ' << c.label << " |";
  os << "\n|---|";
  for (std::size_t i = 0; i < t.candidates.size(); ++i) os << "---|";
  os << "\n";
  for (const auto& c : t.criteria) {
    os << "| " << to_string(c.criterion) << " |";
    for (int n : c.selection_counts) os << ' ' << n << " |";
    os << "\n";
  }

  os << "\n## Selected-model risk relative to " << ref << "\n\n";
  os << "| criterion | 2n d risk_yy | 2n d risk_xy |\n|---|---|---|\n";
  for (const auto& c : t.criteria) {
    os << "| " << to_string(c.criterion) << " | " << cell(c.selected_risk_yy) << " | " << cell(c.selected_risk_xy)
       << " |\n";
  }
  return os.str();
}

std::string records_csv(const StudyResult& r) {
  std::ostringstream os;
  os << "# schema_version: " << kStudySchemaVersion << "\n";
  os << "# tool_version: " << tool_version() << "\n";
  os << "# config: " << json(r.config).dump() << "\n";
  os << "replicate,model,d,status,excluded,iters,loglik,q,penalty_trace,aic,tic,pdio,aic_cd,aic_xy,"
        "riskhat_xy_minus_entropy,loss_yy,loss_xy,fixed_point_residual,max_trace_decrease\n";
  for (const auto& rep : r.replicates) {
    for (std::size_t k = 0; k < rep.candidates.size(); ++k) {
      const CandidateRecord& c = rep.candidates[k];
      const CriteriaReport& q = c.report;
      os << rep.index << ',' << r.config.candidates[k].label() << ',' << r.config.candidates[k].free_dim() << ','
         << to_string(c.status) << ',' << (rep.excluded ? 1 : 0) << ',' << c.iters;
      for (double v : {q.loglik, q.q_at_hat, q.penalty_trace, q.aic, q.tic, q.pdio, q.aic_cd, q.aic_xy,
                       q.riskhat_xy_minus_entropy, c.loss_yy, c.loss_xy, c.fixed_point_residual,
                       c.max_trace_decrease}) {
        os << ',' << format_double(v);
      }
      os << '\n';
    }
  }
  return os.str();
}

void write_study_outputs(const std::filesystem::path& dir, const StudyResult& r) {
  std::filesystem::create_directories(dir);
  auto write = [&](const char* name, const std::string& content) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw ParseError("cannot write " + (dir / name).string());
    out << content;
  };
  write("records.csv", records_csv(r));
  write("tables.json", tables_json(r).dump(2) + "\n");
  std::string md = tables_markdown(r);
  md += "\n<!-- config: " + json(r.config).dump() + " -->\n";
  write("tables.md", md);
}

}  // namespace misscrit
