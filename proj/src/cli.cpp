#include "otm/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <initializer_list>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

namespace otm::cli {

namespace fs = std::filesystem;
using io::json;

namespace {

void check_keys(const json &obj, std::initializer_list<const char *> allowed,
                const std::string &where) {
  if (!obj.is_object())
    throw ConfigError(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!ok.count(it.key()))
      throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

const json &require(const json &obj, const char *key, const std::string &where) {
  if (!obj.is_object() || !obj.contains(key))
    throw ConfigError(where + ": missing '" + key + "'");
  return obj.at(key);
}

double as_number(const json &j, const std::string &where) {
  if (!j.is_number())
    throw ConfigError(where + ": expected a number");
  return j.get<double>();
}

long as_integer(const json &j, const std::string &where) {
  if (!j.is_number_integer())
    throw ConfigError(where + ": expected an integer");
  return j.get<long>();
}

bool as_bool(const json &j, const std::string &where) {
  if (!j.is_boolean())
    throw ConfigError(where + ": expected true or false");
  return j.get<bool>();
}

/// A bare number is read as a 1-vector.
Vector as_vector(const json &j, const std::string &where) {
  if (j.is_number())
    return Vector::Constant(1, j.get<double>());
  if (!j.is_array() || j.empty())
    throw ConfigError(where + ": expected a number or a nonempty array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = as_number(j[i], where);
  return v;
}

Matrix as_matrix(const json &j, const std::string &where) {
  if (j.is_number())
    return Matrix::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty())
    throw ConfigError(where + ": expected a nonempty array of rows");
  Matrix m;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Vector row = as_vector(j[i], where);
    if (i == 0)
      m.resize(static_cast<Eigen::Index>(j.size()), row.size());
    else if (row.size() != m.cols())
      throw ConfigError(where + ": ragged matrix");
    m.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return m;
}

std::string resolve(const RunConfig &cfg, const std::string &file) {
  const fs::path p(file);
  return p.is_absolute() ? file : (fs::path(cfg.base_dir) / p).string();
}

std::vector<Vector> as_points(const RunConfig &cfg, const json &j, const std::string &where) {
  if (j.is_string()) {
    std::istringstream in(io::read_file(resolve(cfg, j.get<std::string>())));
    return io::read_points_csv(in).points();
  }
  if (!j.is_array() || j.empty())
    throw ConfigError(where + ": expected a CSV file name or a nonempty array of points");
  std::vector<Vector> pts;
  for (const auto &p : j)
    pts.push_back(as_vector(p, where));
  return pts;
}

PointCloud as_cloud(const RunConfig &cfg, const json &j, const std::string &where) {
  try {
    return PointCloud(as_points(cfg, j, where));
  } catch (const ConfigError &) {
    throw;
  } catch (const Error &e) {
    throw ConfigError(where + ": " + e.what());
  }
}

double param_or(const json &params, const char *key, double fallback, const std::string &where) {
  return params.contains(key) ? as_number(params.at(key), where + "." + key) : fallback;
}

const json &section(const RunConfig &cfg, const char *name) {
  return require(cfg.doc, name, "config");
}

std::string out_file(const RunConfig &cfg, const std::string &name) {
  return (fs::path(cfg.out_dir) / name).string();
}

constexpr int schema_version = 1;

void write_json(const RunConfig &cfg, const std::string &name, const json &j, std::ostream &log) {
  json doc = {{"schema_version", schema_version}};
  for (const auto &[k, v] : j.items())
    doc[k] = v;
  io::write_file(out_file(cfg, name), doc.dump(2) + "\n");
  log << "wrote " << out_file(cfg, name) << '\n';
}

void write_text(const RunConfig &cfg, const std::string &name, const std::string &text,
                std::ostream &log) {
  io::write_file(out_file(cfg, name), text);
  log << "wrote " << out_file(cfg, name) << '\n';
}

json model_json(const LagrangianModel &model) {
  json params = json::object();
  for (const auto &[k, v] : model.params())
    params[k] = io::number(v);
  const char *names[] = {"free_particle", "harmonic", "double_well", "bounded_cosine", "custom"};
  return {{"name", names[static_cast<int>(model.kind())]},
          {"params", std::move(params)},
          {"c2", io::number(model.c2())},
          {"bounded", model.bounded_potential()},
          {"horizon_midpoint", io::number(admissible_horizon(model, Scheme::midpoint))},
          {"horizon_continuous", io::number(admissible_horizon(model, Scheme::continuous))}};
}

double scheme_action(const RunConfig &cfg, const LagrangianModel &model, const Path &path) {
  return cfg.scheme == Scheme::midpoint ? midpoint_action(model, path)
                                        : continuous_action(model, path, cfg.quadrature_order);
}

std::uint64_t seed_or_default(const RunConfig &cfg) { return cfg.seed.value_or(0); }

} // namespace

LagrangianModel parse_model(const json &j) {
  check_keys(j, {"name", "params"}, "model");
  const json &name_j = require(j, "name", "model");
  if (!name_j.is_string())
    throw ConfigError("model.name: expected a string");
  const std::string name = name_j.get<std::string>();
  const json params = j.contains("params") ? j.at("params") : json::object();
  const std::string where = "model.params";
  try {
    if (name == "free_particle") {
      check_keys(params, {"m"}, where);
      return free_particle(param_or(params, "m", 1.0, where));
    }
    if (name == "harmonic") {
      check_keys(params, {"m", "k", "c2"}, where);
      std::optional<double> c2;
      if (params.contains("c2"))
        c2 = as_number(params.at("c2"), where + ".c2");
      return harmonic(param_or(params, "m", 1.0, where), param_or(params, "k", 1.0, where), c2);
    }
    if (name == "double_well") {
      check_keys(params, {"m", "check_radius"}, where);
      return double_well(param_or(params, "m", 1.0, where),
                         param_or(params, "check_radius", 3.0, where));
    }
    if (name == "bounded_cosine") {
      check_keys(params, {"m", "A", "omega", "dim"}, where);
      const long dim = params.contains("dim") ? as_integer(params.at("dim"), where + ".dim") : 1;
      return bounded_cosine(param_or(params, "m", 1.0, where), param_or(params, "A", 1.0, where),
                            param_or(params, "omega", 1.0, where), static_cast<int>(dim));
    }
  } catch (const ConfigError &) {
    throw;
  } catch (const Error &e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  throw ConfigError("model.name: unknown model '" + name +
                    "' (expected free_particle, harmonic, double_well or bounded_cosine)");
}

MarginalSpec parse_marginal(const json &j) {
  check_keys(j, {"kind", "lower", "upper", "mean", "covariance", "truncation", "points",
                 "sampler", "seed"},
             "marginal");
  MarginalSpec s;
  const std::string kind = require(j, "kind", "marginal").get<std::string>();
  if (kind == "uniform_box") {
    s.kind = MarginalKind::uniform_box;
    s.lower = as_vector(require(j, "lower", "marginal"), "marginal.lower");
    s.upper = as_vector(require(j, "upper", "marginal"), "marginal.upper");
  } else if (kind == "gaussian") {
    s.kind = MarginalKind::gaussian;
    s.mean = as_vector(require(j, "mean", "marginal"), "marginal.mean");
    s.covariance = as_matrix(require(j, "covariance", "marginal"), "marginal.covariance");
    if (j.contains("truncation"))
      s.truncation = as_number(j.at("truncation"), "marginal.truncation");
  } else if (kind == "custom_points") {
    s.kind = MarginalKind::custom_points;
    const json &pts = require(j, "points", "marginal");
    if (!pts.is_array() || pts.empty())
      throw ConfigError("marginal.points: expected a nonempty array");
    for (const auto &p : pts)
      s.points.push_back(as_vector(p, "marginal.points"));
  } else {
    throw ConfigError("marginal.kind: unknown kind '" + kind + "'");
  }
  const std::string sampler =
      j.contains("sampler") ? j.at("sampler").get<std::string>() : std::string("quantile");
  if (sampler == "quantile")
    s.sampler = Sampler::quantile;
  else if (sampler == "grid")
    s.sampler = Sampler::grid;
  else if (sampler == "iid")
    s.sampler = Sampler::iid;
  else
    throw ConfigError("marginal.sampler: unknown sampler '" + sampler + "'");
  if (j.contains("seed"))
    s.seed = static_cast<std::uint64_t>(as_integer(j.at("seed"), "marginal.seed"));
  try {
    s.validate();
  } catch (const Error &e) {
    throw ConfigError(e.what());
  }
  return s;
}

TimeGrid parse_grid(const json &sec) {
  const Vector span = as_vector(require(sec, "span", "grid"), "span");
  if (span.size() != 2 || !(span(1) > span(0)))
    throw ConfigError("span: expected [a, b] with a < b");
  const int given = int(sec.contains("h")) + int(sec.contains("intervals")) +
                    int(sec.contains("nodes"));
  if (given != 1)
    throw ConfigError("grid: give exactly one of 'h', 'intervals' or 'nodes'");
  if (sec.contains("h")) {
    const double h = as_number(sec.at("h"), "h");
    if (!(h > 0))
      throw ConfigError("h: must be positive");
    return TimeGrid::with_max_step(span(0), span(1), h);
  }
  const long count = sec.contains("intervals") ? as_integer(sec.at("intervals"), "intervals")
                                               : as_integer(sec.at("nodes"), "nodes") - 1;
  if (count < 1)
    throw ConfigError("grid: need at least one interval");
  return TimeGrid::uniform(span(0), span(1), count);
}

BvpOptions parse_bvp_options(const json &doc) {
  BvpOptions o;
  if (!doc.contains("solver"))
    return o;
  const json &s = doc.at("solver");
  check_keys(s, {"tol", "max_iterations", "restarts", "check_minimality", "perturbation_trials",
                 "cluster_threshold", "seed"},
             "solver");
  if (s.contains("tol"))
    o.tol = as_number(s.at("tol"), "solver.tol");
  if (s.contains("max_iterations"))
    o.max_iterations = static_cast<int>(as_integer(s.at("max_iterations"), "solver.max_iterations"));
  if (s.contains("restarts"))
    o.restarts = static_cast<int>(as_integer(s.at("restarts"), "solver.restarts"));
  if (s.contains("check_minimality"))
    o.check_minimality = as_bool(s.at("check_minimality"), "solver.check_minimality");
  if (s.contains("perturbation_trials"))
    o.perturbation_trials =
        static_cast<int>(as_integer(s.at("perturbation_trials"), "solver.perturbation_trials"));
  if (s.contains("cluster_threshold"))
    o.cluster_threshold = as_number(s.at("cluster_threshold"), "solver.cluster_threshold");
  if (s.contains("seed"))
    o.seed = static_cast<std::uint64_t>(as_integer(s.at("seed"), "solver.seed"));
  if (!(o.tol > 0) || o.max_iterations < 1 || o.restarts < 0)
    throw ConfigError("solver: tol > 0, max_iterations >= 1 and restarts >= 0 required");
  return o;
}

RunConfig load_config(const std::string &config_path, const std::optional<std::string> &out,
                      std::optional<std::uint64_t> seed, std::optional<int> threads,
                      bool allow_long_horizon) {
  RunConfig cfg;
  const std::string text = io::read_file(config_path);
  try {
    cfg.doc = json::parse(text);
  } catch (const json::parse_error &e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  check_keys(cfg.doc, {"model", "seed", "threads", "output_dir", "allow_long_horizon", "scheme",
                       "quadrature_order", "solver", "flow_options", "bvp", "flow", "transport",
                       "converge", "stationary"},
             "config");
  cfg.base_dir = fs::path(config_path).parent_path().string();
  if (cfg.base_dir.empty())
    cfg.base_dir = ".";

  if (cfg.doc.contains("seed")) {
    const json &s = cfg.doc.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
      throw ConfigError("seed: expected a non-negative integer");
    cfg.seed = s.get<std::uint64_t>();
  }
  if (seed)
    cfg.seed = seed;

  if (cfg.doc.contains("threads"))
    cfg.threads = static_cast<int>(as_integer(cfg.doc.at("threads"), "threads"));
  if (threads)
    cfg.threads = *threads;
  if (cfg.threads < 1)
    throw ConfigError("threads: must be at least 1");

  cfg.allow_long_horizon = allow_long_horizon;
  if (cfg.doc.contains("allow_long_horizon"))
    cfg.allow_long_horizon =
        cfg.allow_long_horizon || as_bool(cfg.doc.at("allow_long_horizon"), "allow_long_horizon");

  if (cfg.doc.contains("scheme")) {
    const std::string s = cfg.doc.at("scheme").get<std::string>();
    if (s == "midpoint")
      cfg.scheme = Scheme::midpoint;
    else if (s == "continuous")
      cfg.scheme = Scheme::continuous;
    else
      throw ConfigError("scheme: expected 'midpoint' or 'continuous'");
  }
  if (cfg.doc.contains("quadrature_order")) {
    cfg.quadrature_order =
        static_cast<int>(as_integer(cfg.doc.at("quadrature_order"), "quadrature_order"));
    if (cfg.quadrature_order < 1 || cfg.quadrature_order > 64)
      throw ConfigError("quadrature_order: expected 1..64");
  }

  // Output directory: --out, then the environment override, then the config.
  if (out) {
    cfg.out_dir = *out;
  } else if (const char *env = std::getenv("OTM_OUTPUT_DIR"); env && *env) {
    cfg.out_dir = env;
  } else if (cfg.doc.contains("output_dir")) {
    cfg.out_dir = resolve(cfg, cfg.doc.at("output_dir").get<std::string>());
  } else {
    cfg.out_dir = "otm_out";
  }
  // A transport run on an explicit cost matrix needs no model.
  if (cfg.doc.contains("model"))
    parse_model(require(cfg.doc, "model", "config"));
  parse_bvp_options(cfg.doc);
  return cfg;
}

namespace {

FlowOptions parse_flow_options(const json &doc) {
  FlowOptions o;
  if (!doc.contains("flow_options"))
    return o;
  const json &f = doc.at("flow_options");
  check_keys(f, {"min_substeps", "max_substep", "guard_radius", "newton_tol",
                 "newton_max_iterations"},
             "flow_options");
  if (f.contains("min_substeps"))
    o.min_substeps = static_cast<int>(as_integer(f.at("min_substeps"), "flow_options.min_substeps"));
  if (f.contains("max_substep"))
    o.max_substep = as_number(f.at("max_substep"), "flow_options.max_substep");
  if (f.contains("guard_radius"))
    o.guard_radius = as_number(f.at("guard_radius"), "flow_options.guard_radius");
  if (f.contains("newton_tol"))
    o.newton_tol = as_number(f.at("newton_tol"), "flow_options.newton_tol");
  if (f.contains("newton_max_iterations"))
    o.newton_max_iterations = static_cast<int>(
        as_integer(f.at("newton_max_iterations"), "flow_options.newton_max_iterations"));
  if (o.min_substeps < 1 || !(o.max_substep > 0) || !(o.guard_radius > 0) ||
      !(o.newton_tol > 0) || o.newton_max_iterations < 1)
    throw ConfigError("flow_options: values must be positive");
  return o;
}

CostChoice parse_cost(const json &sec, const char *where) {
  if (!sec.contains("cost"))
    return CostChoice::automatic;
  const std::string c = sec.at("cost").get<std::string>();
  if (c == "auto")
    return CostChoice::automatic;
  if (c == "bvp")
    return CostChoice::bvp;
  if (c == "closed_form")
    return CostChoice::closed_form;
  throw ConfigError(std::string(where) + ".cost: expected 'auto', 'bvp' or 'closed_form'");
}

std::vector<double> as_list(const json &j, const std::string &where) {
  if (!j.is_array() || j.empty())
    throw ConfigError(where + ": expected a nonempty array");
  std::vector<double> v;
  for (const auto &e : j)
    v.push_back(as_number(e, where));
  return v;
}

} // namespace

int cmd_bvp(const RunConfig &cfg, std::ostream &log) {
  const auto model = parse_model(require(cfg.doc, "model", "config"));
  const json &sec = section(cfg, "bvp");
  check_keys(sec, {"x", "y", "span", "h", "intervals", "nodes"}, "bvp");
  const Vector x = as_vector(require(sec, "x", "bvp"), "bvp.x");
  const Vector y = as_vector(require(sec, "y", "bvp"), "bvp.y");
  if (x.size() != y.size())
    throw ConfigError("bvp: x and y dimensions differ");
  const TimeGrid grid = parse_grid(sec);
  const auto r = solve_bvp(model, x, y, grid, parse_bvp_options(cfg.doc));
  json j = io::to_json(r);
  j["model"] = model_json(model);
  j["h"] = io::number(grid.max_step());
  j["action"] = io::number(scheme_action(cfg, model, r.path));
  j["continuous_action"] = io::number(continuous_action(model, r.path, cfg.quadrature_order));
  j["within_horizon"] = grid.span() <= admissible_horizon(model, Scheme::midpoint);
  write_json(cfg, "bvp.json", j, log);
  std::ostringstream csv;
  io::write_path_csv(csv, r.path);
  write_text(cfg, "bvp_path.csv", csv.str(), log);
  if (!r.converged) {
    log << "bvp: " << r.diagnostic << '\n';
    return exit_solver;
  }
  return exit_ok;
}

int cmd_flow(const RunConfig &cfg, std::ostream &log) {
  const auto model = parse_model(require(cfg.doc, "model", "config"));
  const json &sec = section(cfg, "flow");
  check_keys(sec, {"x", "v", "span", "h", "intervals", "nodes", "kind"}, "flow");
  const Vector x = as_vector(require(sec, "x", "flow"), "flow.x");
  const Vector v = as_vector(require(sec, "v", "flow"), "flow.v");
  if (x.size() != v.size())
    throw ConfigError("flow: x and v dimensions differ");
  const TimeGrid grid = parse_grid(sec);
  const std::string kind = sec.contains("kind") ? sec.at("kind").get<std::string>() : "discrete";
  if (kind != "discrete" && kind != "reference")
    throw ConfigError("flow.kind: expected 'discrete' or 'reference'");
  const auto opts = parse_flow_options(cfg.doc);
  const PhasePoint start(x, v);
  const auto r = kind == "discrete" ? discrete_flow(model, start, grid, opts)
                                    : reference_flow(model, start, grid, opts);
  json j = io::to_json(r);
  j["kind"] = kind;
  j["model"] = model_json(model);
  j["h"] = io::number(grid.max_step());
  j["action"] = io::number(scheme_action(cfg, model, r.path));
  if (grid.intervals() >= 2) {
    const Vector e = nodal_energy(model, r.path);
    j["energy_max_deviation"] = io::number((e.array() - e(0)).abs().maxCoeff());
    j["el_residual"] = io::number(el_residual(model, r.path));
  }
  write_json(cfg, "flow.json", j, log);
  std::ostringstream csv;
  io::write_path_csv(csv, r.path);
  write_text(cfg, "flow_path.csv", csv.str(), log);
  return exit_ok;
}

int cmd_transport(const RunConfig &cfg, std::ostream &log) {
  const json &sec = section(cfg, "transport");
  check_keys(sec, {"cost_matrix", "source", "target", "span", "h", "intervals", "nodes", "cost"},
             "transport");
  Matrix costs;
  json j = json::object();
  if (sec.contains("cost_matrix")) {
    const json &cm = sec.at("cost_matrix");
    if (cm.is_string()) {
      std::istringstream in(io::read_file(resolve(cfg, cm.get<std::string>())));
      costs = io::read_matrix_csv(in);
    } else {
      costs = as_matrix(cm, "transport.cost_matrix");
    }
    if (costs.rows() != costs.cols())
      throw ConfigError("transport.cost_matrix: matrix is not square");
    j["cost_source"] = "matrix";
  } else {
    const auto model = parse_model(require(cfg.doc, "model", "config"));
    const PointCloud src = as_cloud(cfg, require(sec, "source", "transport"), "transport.source");
    const PointCloud tgt = as_cloud(cfg, require(sec, "target", "transport"), "transport.target");
    if (src.size() != tgt.size() || src.dim() != tgt.dim())
      throw ConfigError("transport: source and target must have equal size and dimension");
    const TimeGrid grid = parse_grid(sec);
    check_horizon(model, grid.span(), cfg.allow_long_horizon);
    const CostChoice choice = parse_cost(sec, "transport");
    const bool closed = choice == CostChoice::closed_form ||
                        (choice == CostChoice::automatic && has_closed_form_cost(model));
    costs = cost_matrix(model, src, tgt, grid, closed ? CostKind::closed_form : CostKind::bvp,
                        parse_bvp_options(cfg.doc), cfg.threads);
    j["cost_source"] = closed ? "closed_form" : "bvp";
    j["model"] = model_json(model);
  }
  const auto plan = solve_assignment(costs);
  const json plan_j = io::to_json(plan);
  for (const auto &[k, v] : plan_j.items())
    j[k] = v;
  j["N"] = costs.rows();
  write_json(cfg, "transport.json", j, log);
  std::ostringstream m;
  io::write_matrix_csv(m, costs);
  write_text(cfg, "cost_matrix.csv", m.str(), log);
  std::ostringstream p;
  p << "row,col,cost\n";
  for (std::size_t i = 0; i < plan.perm.size(); ++i)
    p << i << ',' << plan.perm[i] << ','
      << io::format_double(costs(static_cast<Eigen::Index>(i), plan.perm[i])) << '\n';
  write_text(cfg, "plan.csv", p.str(), log);
  return exit_ok;
}

int cmd_converge(const RunConfig &cfg, std::ostream &log) {
  const auto model = parse_model(require(cfg.doc, "model", "config"));
  const json &sec = section(cfg, "converge");
  check_keys(sec, {"marginal_a", "marginal_b", "Ns", "hs", "span", "reference", "cost"},
             "converge");
  const auto spec_a = parse_marginal(require(sec, "marginal_a", "converge"));
  const auto spec_b = parse_marginal(require(sec, "marginal_b", "converge"));
  if ((spec_a.sampler == Sampler::iid || spec_b.sampler == Sampler::iid) && !cfg.seed)
    throw ConfigError("converge: iid sampling requires a seed (config 'seed' or --seed)");
  const auto ns_raw = as_list(require(sec, "Ns", "converge"), "converge.Ns");
  const auto hs = as_list(require(sec, "hs", "converge"), "converge.hs");
  if (ns_raw.size() != hs.size())
    throw ConfigError("converge: Ns and hs must have equal length");
  std::vector<std::size_t> ns;
  for (double n : ns_raw) {
    if (!(n >= 1) || n != std::floor(n))
      throw ConfigError("converge.Ns: entries must be positive integers");
    ns.push_back(static_cast<std::size_t>(n));
  }
  const Vector span = as_vector(require(sec, "span", "converge"), "converge.span");
  if (span.size() != 2 || !(span(1) > span(0)))
    throw ConfigError("converge.span: expected [a, b] with a < b");

  ConvergenceOptions opts;
  opts.otm.cost = parse_cost(sec, "converge");
  opts.otm.bvp = parse_bvp_options(cfg.doc);
  opts.otm.allow_long_horizon = cfg.allow_long_horizon;
  opts.otm.threads = cfg.threads;
  opts.flow = parse_flow_options(cfg.doc);
  opts.seed = seed_or_default(cfg);
  if (sec.contains("reference"))
    opts.reference = as_number(sec.at("reference"), "converge.reference");

  const auto report = run_convergence_study(model, spec_a, spec_b, ns, hs, span(0), span(1), opts);
  std::ostringstream csv;
  io::write_convergence_csv(csv, report);
  write_text(cfg, "converge.csv", csv.str(), log);
  json j = io::to_json(report);
  j["model"] = model_json(model);
  j["seed"] = opts.seed;
  write_json(cfg, "converge.json", j, log);
  for (const auto &row : report.rows)
    if (row.status != "ok")
      log << "converge: N=" << row.n << " h=" << row.h_requested << ": " << row.status << '\n';
  return report.all_ok() ? exit_ok : exit_partial;
}

int cmd_stationary(const RunConfig &cfg, std::ostream &log) {
  const auto model = parse_model(require(cfg.doc, "model", "config"));
  const json &sec = section(cfg, "stationary");
  check_keys(sec, {"paths", "source", "target", "span", "hs"}, "stationary");
  const auto hs = as_list(require(sec, "hs", "stationary"), "stationary.hs");
  for (double h : hs)
    if (!(h > 0))
      throw ConfigError("stationary.hs: mesh sizes must be positive");

  std::optional<EmpiricalPathMeasure> pi0;
  if (sec.contains("paths")) {
    std::istringstream in(io::read_file(resolve(cfg, sec.at("paths").get<std::string>())));
    pi0.emplace(io::read_paths_csv(in));
  } else {
    const PointCloud src = as_cloud(cfg, require(sec, "source", "stationary"), "stationary.source");
    const PointCloud tgt = as_cloud(cfg, require(sec, "target", "stationary"), "stationary.target");
    if (src.size() != tgt.size() || src.dim() != tgt.dim())
      throw ConfigError("stationary: source and target must have equal size and dimension");
    const Vector span = as_vector(require(sec, "span", "stationary"), "stationary.span");
    if (span.size() != 2 || !(span(1) > span(0)))
      throw ConfigError("stationary.span: expected [a, b] with a < b");
    const TimeGrid grid = TimeGrid::with_max_step(span(0), span(1), hs.front());
    std::vector<Path> lines;
    for (std::size_t i = 0; i < src.size(); ++i)
      lines.push_back(Path::line(grid, src[i], tgt[i]));
    pi0.emplace(std::move(lines));
  }
  check_horizon(model, pi0->end() - pi0->start(), cfg.allow_long_horizon);

  StationarityOptions opts;
  opts.bvp = parse_bvp_options(cfg.doc);
  if (!cfg.doc.contains("solver") || !cfg.doc.at("solver").contains("check_minimality"))
    opts.bvp.check_minimality = false;
  if (!cfg.doc.contains("solver") || !cfg.doc.at("solver").contains("restarts"))
    opts.bvp.restarts = 0;
  opts.flow = parse_flow_options(cfg.doc);
  opts.threads = cfg.threads;
  const auto report = run_stationarity_study(model, *pi0, hs, opts);

  std::ostringstream csv;
  io::write_stationarity_csv(csv, report);
  write_text(cfg, "stationary.csv", csv.str(), log);
  json j = io::to_json(report);
  j["model"] = model_json(model);
  j["N"] = pi0->size();
  write_json(cfg, "stationary.json", j, log);
  for (const auto &lv : report.levels)
    if (!lv.converged) {
      log << "stationary: Newton did not converge at h = " << lv.h << '\n';
      return exit_solver;
    }
  if (!report.scaling_ok) {
    log << "stationary: reconstruction distance exceeds 2 c h at some level\n";
    return exit_partial;
  }
  return exit_ok;
}

int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
  CLI::App app{"Optimal-transportation meshfree method: boundary value problems, discrete "
               "flows, assignment and convergence studies"};
  app.name("otm");
  app.require_subcommand(1);
  std::string config;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool allow_long = false;

  struct Entry {
    const char *name;
    const char *help;
    int (*fn)(const RunConfig &, std::ostream &);
  };
  const Entry entries[] = {
      {"bvp", "Discrete minimizing extremal between two points", cmd_bvp},
      {"flow", "Discrete or reference Euler-Lagrange flow from a phase point", cmd_flow},
      {"transport", "Cost matrix and optimal assignment", cmd_transport},
      {"converge", "Convergence study over (N, h) schedules", cmd_converge},
      {"stationary", "Stationary-point study over a mesh schedule", cmd_stationary},
  };
  std::vector<std::pair<CLI::App *, const Entry *>> subs;
  for (const auto &e : entries) {
    auto *sub = app.add_subcommand(e.name, e.help);
    sub->add_option("--config", config, "JSON config file")->required();
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--seed", seed, "Top-level random seed");
    sub->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--allow-long-horizon", allow_long,
                  "Permit spans beyond the admissible horizon");
    subs.emplace_back(sub, &e);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e, out, err) == 0 ? exit_ok : exit_config;
  }

  for (const auto &[sub, entry] : subs) {
    if (!sub->parsed())
      continue;
    try {
      const RunConfig cfg = load_config(config, out_dir, seed, threads, allow_long);
      return entry->fn(cfg, out);
    } catch (const ConfigError &e) {
      err << "otm " << entry->name << ": config error: " << e.what() << '\n';
      return exit_config;
    } catch (const io::json::exception &e) {
      err << "otm " << entry->name << ": config error: " << e.what() << '\n';
      return exit_config;
    } catch (const Error &e) {
      err << "otm " << entry->name << ": " << e.what() << '\n';
      return exit_solver;
    } catch (const std::exception &e) {
      err << "otm " << entry->name << ": " << e.what() << '\n';
      return exit_solver;
    }
  }
  return exit_config;
}

} // namespace otm::cli
