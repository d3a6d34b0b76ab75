#pragma once

// JSON views of the reports and small CSV helpers. Non-finite numbers become
// null; object keys are sorted, so equal inputs give equal text.

#include <string>
#include <vector>

#include <json.hpp>

#include "stable/core_model.hpp"
#include "stable/density.hpp"
#include "stable/green.hpp"
#include "stable/harnack.hpp"

namespace stable {

using Json = nlohmann::json;

Json to_json(const Vec& v);
Json to_json(const StableModel& model);
Json to_json(const TransitionDensityGrid& grid);
Json to_json(const RadialGreenProfile& profile);
Json to_json(const LemmaReport& report);
Json to_json(const HarnackParams& params);
Json to_json(const HarnackReport& report);
Json to_json(const SignedTrial& trial);
Json to_json(const HoelderIteration& it);
Json to_json(const HoelderFit& fit);
Json to_json(const TailDecayReport& report);

/// Hex form of a 64-bit hash.
std::string hex64(std::uint64_t v);

/// Writes `text` to `path`, throwing Io on failure.
void write_text(const std::string& path, const std::string& text);

/// Minimal CSV table: a header and rows of preformatted cells.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
  void add(std::vector<std::string> row);
  std::string str() const;
  std::size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Shortest text that reads back to the same double.
std::string num(double v);

}  // namespace stable
