#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "otm/path_measures.hpp"
#include "otm/pipeline.hpp"

namespace otm::io {

using json = nlohmann::ordered_json;

/// 17 significant digits; NaN becomes an empty field.
std::string format_double(double v);

/// Header t,x_1..x_n then one row per node.
void write_path_csv(std::ostream &os, const Path &path);
/// Long format: path_id,t,x_1..x_n.
void write_paths_csv(std::ostream &os, const EmpiricalPathMeasure &pi);
/// Inverse of write_paths_csv; rows of one path must be contiguous.
EmpiricalPathMeasure read_paths_csv(std::istream &is);

/// Plain numeric CSV; a non-numeric first row is treated as a header.
Matrix read_matrix_csv(std::istream &is);
void write_matrix_csv(std::ostream &os, const Matrix &m);

/// Header x_1..x_n then one row per point.
void write_points_csv(std::ostream &os, const PointCloud &cloud);
PointCloud read_points_csv(std::istream &is);

void write_convergence_csv(std::ostream &os, const ConvergenceReport &report);
void write_stationarity_csv(std::ostream &os, const StationarityReport &report);

/// NaN and infinities map to null.
json number(double v);
json to_json(const Vector &v);
json to_json(const Path &path); // {"columns": [...], "rows": [[t, x...], ...]}
json to_json(const BvpResult &r);
json to_json(const FlowResult &r);
json to_json(const AssignmentPlan &plan);
json to_json(const SummaryStats &s);
json to_json(const ConcentrationReport &r);
json to_json(const ConvergenceReport &r);
json to_json(const StationarityReport &r);

/// Writes `text` to `path`, creating parent directories.
void write_file(const std::string &path, const std::string &text);
std::string read_file(const std::string &path);

} // namespace otm::io
