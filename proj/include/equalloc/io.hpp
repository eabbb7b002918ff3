#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "equalloc/alloc_core.hpp"
#include "equalloc/curves.hpp"
#include "equalloc/estimator.hpp"
#include "equalloc/genomic.hpp"
#include "equalloc/optimizer.hpp"

namespace equalloc {

using Json = nlohmann::json;

// Document conversions. Readers throw ConfigError naming the offending field.
Json to_json(const Allocation& alloc);
Json to_json(const CostModel& cost);
Json to_json(const UtilitySpec& utility);
Json to_json(const AnalyticCurve& curve);
Json to_json(const EstimatorConfig& estimator);
Json to_json(const GenomicConfig& world);
Json to_json(const SolveResult& result);

Allocation allocation_from_json(const Json& doc);  // {"counts": [...]} or a bare array
CostModel cost_from_json(const Json& doc);
UtilitySpec utility_from_json(const Json& doc);
AnalyticCurve curve_from_json(const Json& doc);      // gamma nested or flat row-major
EstimatorConfig estimator_from_json(const Json& doc);
GenomicConfig genomic_from_json(const Json& doc);    // missing fields keep their defaults

std::string to_string(CurveForm form);
CurveForm curve_form_from_string(const std::string& name);

Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// Hex SHA-256 of the canonical (key-sorted, compact) serialization.
std::string config_digest(const Json& config);

// Locale-independent shortest round-trip rendering of a double.
std::string format_number(double value);

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row);
};

// Header row, then a "# config_digest: <hex>" line, then the rows.
std::string render_csv(const Table& table, const std::string& digest);
void write_csv(const std::filesystem::path& path, const Table& table, const std::string& digest);

}  // namespace equalloc
