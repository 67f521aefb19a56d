#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "overem/em.hpp"

namespace overem {

// RFC-4180 writer: fields holding a comma, quote, CR or LF are quoted, quotes doubled.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}
  void row(const std::vector<std::string>& fields);
  static std::string quote(const std::string& field);

 private:
  std::ostream& os_;
};

// {"dim": d, "means": [[...], ...], "weights": [...]}
GaussianMixture read_model_json(const std::string& path);
GaussianMixture parse_model_json(const std::string& text);
std::string model_to_json(const GaussianMixture& model);

// One point per line, comma separated, no header.
Dataset read_dataset_csv(const std::string& path);
void write_dataset_csv(std::ostream& os, const Dataset& data);

// {"converged", "iterations", "final_means", "final_weights", "error"}
std::string run_result_to_json(const RunResult& result, double error, bool pretty = false);

}  // namespace overem
