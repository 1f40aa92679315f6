#pragma once

#include "rqlab/chain.hpp"
#include "rqlab/rql.hpp"
#include "rqlab/rql_ais.hpp"
#include "rqlab/solvers.hpp"
#include "rqlab/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <string>
#include <vector>

namespace rqlab {

nlohmann::json matrix_json(const Matrix& m);
nlohmann::json mask_json(const Mask& m);
nlohmann::json vector_json(const Vector& v);

/// Stationary distribution summary plus the full induced model.
nlohmann::json to_json(const StationaryModel& sm);
nlohmann::json to_json(const QTable& q);

/// Writes `text` to `path`, creating parent directories.
void write_text(const std::string& path, const std::string& text);
/// Pretty-printed JSON with a trailing newline.
void write_json(const std::string& path, const nlohmann::json& j);

/// Shortest round-trip decimal form (locale independent).
std::string format_double(double x);

/// Metric CSVs shared by the CLI and the acceptance run; one block of rows per seed.
std::string rql_metrics_header();
std::string rql_metrics_rows(std::uint64_t seed, const RqlRun& run);
std::string ais_metrics_header();
std::string ais_metrics_rows(std::uint64_t seed, const RqlAisRun& run);

}  // namespace rqlab
