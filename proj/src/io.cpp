#include "otm/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace otm::io {

std::string format_double(double v) {
  if (std::isnan(v))
    return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

void write_header(std::ostream &os, std::initializer_list<const char *> lead, Eigen::Index dim) {
  bool first = true;
  for (const char *c : lead) {
    os << (first ? "" : ",") << c;
    first = false;
  }
  for (Eigen::Index k = 1; k <= dim; ++k)
    os << (first ? "" : ",") << "x_" << k, first = false;
  os << '\n';
}

std::vector<std::string> split(const std::string &line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ','))
    out.push_back(cell);
  if (!line.empty() && line.back() == ',')
    out.emplace_back();
  return out;
}

bool parse_double(std::string s, double &out) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.pop_back();
  std::size_t start = 0;
  while (start < s.size() && std::isspace(static_cast<unsigned char>(s[start])))
    ++start;
  s = s.substr(start);
  if (s.empty())
    return false;
  char *end = nullptr;
  errno = 0;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && errno != ERANGE;
}

// Numeric rows; a leading non-numeric row is skipped as a header.
std::vector<std::vector<double>> read_rows(std::istream &is, const char *what) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos)
      continue;
    std::vector<double> row;
    bool numeric = true;
    for (const auto &cell : split(line)) {
      double v = 0;
      if (!parse_double(cell, v)) {
        numeric = false;
        break;
      }
      row.push_back(v);
    }
    if (!numeric) {
      if (rows.empty() && lineno == 1)
        continue;
      throw ConfigError(std::string(what) + ": non-numeric entry on line " +
                        std::to_string(lineno));
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ConfigError(std::string(what) + ": ragged row on line " + std::to_string(lineno));
    rows.push_back(std::move(row));
  }
  if (rows.empty())
    throw ConfigError(std::string(what) + ": no data rows");
  return rows;
}

} // namespace

void write_path_csv(std::ostream &os, const Path &path) {
  write_header(os, {"t"}, path.dim());
  for (Eigen::Index j = 0; j < path.grid().size(); ++j) {
    os << format_double(path.grid().node(j));
    for (Eigen::Index k = 0; k < path.dim(); ++k)
      os << ',' << format_double(path.nodes()(k, j));
    os << '\n';
  }
}

void write_paths_csv(std::ostream &os, const EmpiricalPathMeasure &pi) {
  write_header(os, {"path_id", "t"}, pi.dim());
  for (std::size_t i = 0; i < pi.size(); ++i) {
    const Path &p = pi[i];
    for (Eigen::Index j = 0; j < p.grid().size(); ++j) {
      os << i << ',' << format_double(p.grid().node(j));
      for (Eigen::Index k = 0; k < p.dim(); ++k)
        os << ',' << format_double(p.nodes()(k, j));
      os << '\n';
    }
  }
}

EmpiricalPathMeasure read_paths_csv(std::istream &is) {
  const auto rows = read_rows(is, "read_paths_csv");
  if (rows.front().size() < 3)
    throw ConfigError("read_paths_csv: need columns path_id,t,x_1..");
  const auto dim = static_cast<Eigen::Index>(rows.front().size() - 2);
  std::vector<Path> paths;
  std::size_t r = 0;
  while (r < rows.size()) {
    const double id = rows[r][0];
    std::size_t e = r;
    while (e < rows.size() && rows[e][0] == id)
      ++e;
    Vector t(static_cast<Eigen::Index>(e - r));
    Matrix x(dim, t.size());
    for (std::size_t q = r; q < e; ++q) {
      const auto j = static_cast<Eigen::Index>(q - r);
      t(j) = rows[q][1];
      for (Eigen::Index k = 0; k < dim; ++k)
        x(k, j) = rows[q][static_cast<std::size_t>(k) + 2];
    }
    try {
      paths.emplace_back(TimeGrid(std::move(t)), std::move(x));
    } catch (const Error &err) {
      throw ConfigError("read_paths_csv: path " + format_double(id) + ": " + err.what());
    }
    r = e;
  }
  try {
    return EmpiricalPathMeasure(std::move(paths));
  } catch (const Error &err) {
    throw ConfigError(std::string("read_paths_csv: ") + err.what());
  }
}

Matrix read_matrix_csv(std::istream &is) {
  const auto rows = read_rows(is, "read_matrix_csv");
  Matrix m(static_cast<Eigen::Index>(rows.size()),
           static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

void write_matrix_csv(std::ostream &os, const Matrix &m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    os << (j ? "," : "") << "c_" << j;
  os << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      os << (j ? "," : "") << format_double(m(i, j));
    os << '\n';
  }
}

void write_points_csv(std::ostream &os, const PointCloud &cloud) {
  write_header(os, {}, cloud.dim());
  for (const auto &p : cloud.points()) {
    for (Eigen::Index k = 0; k < p.size(); ++k)
      os << (k ? "," : "") << format_double(p(k));
    os << '\n';
  }
}

PointCloud read_points_csv(std::istream &is) {
  const auto rows = read_rows(is, "read_points_csv");
  std::vector<Vector> pts;
  for (const auto &r : rows)
    pts.push_back(Eigen::Map<const Vector>(r.data(), static_cast<Eigen::Index>(r.size())));
  return PointCloud(std::move(pts));
}

void write_convergence_csv(std::ostream &os, const ConvergenceReport &report) {
  os << "N,h_requested,h,intervals,status,min_action,d_bl_upper_to_finest,"
        "max_el_residual,max_flow_reconstruction_dist\n";
  for (const auto &r : report.rows) {
    std::string status = r.status;
    for (char &c : status)
      if (c == ',' || c == '\n' || c == '"')
        c = ';';
    os << r.n << ',' << format_double(r.h_requested) << ',' << format_double(r.h) << ','
       << r.intervals << ',' << status << ',' << format_double(r.min_action) << ','
       << format_double(r.d_bl_upper_to_finest) << ',' << format_double(r.max_el_residual)
       << ',' << format_double(r.max_flow_reconstruction_dist) << '\n';
  }
}

void write_stationarity_csv(std::ostream &os, const StationarityReport &report) {
  os << "h_requested,h,intervals,max_el_residual,max_reconstruction,mean_reconstruction,"
        "max_newton_iterations,ratio_to_previous,within_bound,converged\n";
  for (const auto &l : report.levels) {
    os << format_double(l.h_requested) << ',' << format_double(l.h) << ',' << l.intervals
       << ',' << format_double(l.max_el_residual) << ',' << format_double(l.max_reconstruction)
       << ',' << format_double(l.mean_reconstruction) << ',' << l.max_newton_iterations << ','
       << (l.ratio_to_previous ? format_double(*l.ratio_to_previous) : "") << ','
       << (l.within_bound ? 1 : 0) << ',' << (l.converged ? 1 : 0) << '\n';
  }
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

namespace {

json optional_number(const std::optional<double> &v) {
  return v ? number(*v) : json(nullptr);
}

} // namespace

json to_json(const Vector &v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    a.push_back(number(v(i)));
  return a;
}

json to_json(const Path &path) {
  json cols = json::array({"t"});
  for (Eigen::Index k = 1; k <= path.dim(); ++k)
    cols.push_back("x_" + std::to_string(k));
  json rows = json::array();
  for (Eigen::Index j = 0; j < path.grid().size(); ++j) {
    json row = json::array({number(path.grid().node(j))});
    for (Eigen::Index k = 0; k < path.dim(); ++k)
      row.push_back(number(path.nodes()(k, j)));
    rows.push_back(std::move(row));
  }
  return {{"columns", std::move(cols)}, {"rows", std::move(rows)}};
}

json to_json(const BvpResult &r) {
  return {{"converged", r.converged},     {"cost", number(r.cost)},
          {"residual", number(r.residual)}, {"iterations", r.iterations},
          {"clusters", r.clusters},       {"diagnostic", r.diagnostic},
          {"path", to_json(r.path)}};
}

json to_json(const FlowResult &r) {
  return {{"final_position", to_json(r.final_state.x)},
          {"final_velocity", to_json(r.final_state.v)},
          {"newton_iterations_max", r.newton_iterations_max},
          {"path", to_json(r.path)}};
}

json to_json(const AssignmentPlan &plan) {
  return {{"perm", plan.perm},
          {"total_cost", number(plan.total_cost)},
          {"average_cost", number(plan.average_cost)}};
}

json to_json(const SummaryStats &s) {
  return {{"max", number(s.max)}, {"mean", number(s.mean)}, {"p50", number(s.p50)},
          {"p90", number(s.p90)}};
}

json to_json(const ConcentrationReport &r) {
  return {{"el_residual", to_json(r.residual)},
          {"flow_reconstruction", to_json(r.reconstruction_stats)},
          {"action", to_json(r.action)}};
}

json to_json(const ConvergenceReport &r) {
  json rows = json::array();
  for (const auto &row : r.rows)
    rows.push_back({{"N", row.n},
                    {"h_requested", number(row.h_requested)},
                    {"h", number(row.h)},
                    {"intervals", row.intervals},
                    {"status", row.status},
                    {"min_action", number(row.min_action)},
                    {"d_bl_upper_to_finest", number(row.d_bl_upper_to_finest)},
                    {"max_el_residual", number(row.max_el_residual)},
                    {"max_flow_reconstruction_dist", number(row.max_flow_reconstruction_dist)},
                    {"wall_time", number(row.wall_time)}});
  return {{"all_ok", r.all_ok()},
          {"reference", optional_number(r.reference)},
          {"reference_source", r.reference_source},
          {"action_order", optional_number(r.action_order)},
          {"trajectory_order", optional_number(r.trajectory_order)},
          {"rows", std::move(rows)}};
}

json to_json(const StationarityReport &r) {
  json levels = json::array();
  double max_residual = 0;
  for (const auto &l : r.levels) {
    max_residual = std::max(max_residual, l.max_el_residual);
    levels.push_back({{"h_requested", number(l.h_requested)},
                      {"h", number(l.h)},
                      {"intervals", l.intervals},
                      {"max_el_residual", number(l.max_el_residual)},
                      {"max_reconstruction", number(l.max_reconstruction)},
                      {"mean_reconstruction", number(l.mean_reconstruction)},
                      {"max_newton_iterations", l.max_newton_iterations},
                      {"ratio_to_previous", optional_number(l.ratio_to_previous)},
                      {"within_bound", l.within_bound},
                      {"converged", l.converged}});
  }
  return {{"max_residual", number(max_residual)},
          {"fitted_c", number(r.fitted_c)},
          {"scaling_ok", r.scaling_ok},
          {"levels", std::move(levels)}};
}

void write_file(const std::string &path, const std::string &text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path())
    std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out)
    throw Error("cannot open '" + path + "' for writing");
  out << text;
  if (!out)
    throw Error("failed writing '" + path + "'");
}

std::string read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

} // namespace otm::io
