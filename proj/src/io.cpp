#include "overem/io.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace overem {

using nlohmann::json;

std::string CsvWriter::quote(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) os_ << ',';
    os_ << quote(fields[i]);
  }
  os_ << "\r\n";
}

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

GaussianMixture parse_model_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("model json: ") + e.what());
  }
  require(j.is_object() && j.contains("means") && j.contains("weights"),
          "model json: needs means and weights");
  const auto& jm = j["means"];
  const auto& jw = j["weights"];
  require(jm.is_array() && !jm.empty() && jw.is_array() && jw.size() == jm.size(),
          "model json: means and weights must be arrays of equal length");
  const int k = int(jm.size());
  require(jm[0].is_array() && !jm[0].empty(), "model json: each mean is an array");
  const int d = int(jm[0].size());
  if (j.contains("dim")) require(j["dim"].get<int>() == d, "model json: dim disagrees with means");
  Matrix means(k, d);
  Vector weights(k);
  for (int i = 0; i < k; ++i) {
    require(jm[i].is_array() && int(jm[i].size()) == d, "model json: ragged means");
    for (int c = 0; c < d; ++c) means(i, c) = jm[i][c].get<double>();
    weights(i) = jw[i].get<double>();
  }
  return GaussianMixture(means, weights);
}

GaussianMixture read_model_json(const std::string& path) { return parse_model_json(slurp(path)); }

namespace {

json matrix_json(const Matrix& m) {
  json a = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (int c = 0; c < m.cols(); ++c) r.push_back(m(i, c));
    a.push_back(r);
  }
  return a;
}

json vector_json(const Vector& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

}  // namespace

std::string model_to_json(const GaussianMixture& model) {
  json j{{"dim", model.dim()}, {"means", matrix_json(model.means())}, {"weights", vector_json(model.weights())}};
  return j.dump();
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> r;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        r.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw std::invalid_argument("dataset csv: bad number '" + cell + "'");
      }
    }
    require(rows.empty() || r.size() == rows[0].size(), "dataset csv: ragged rows");
    rows.push_back(std::move(r));
  }
  require(!rows.empty(), "dataset csv: no points");
  Dataset data;
  data.points.resize(Eigen::Index(rows.size()), Eigen::Index(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < rows[i].size(); ++c) data.points(i, c) = rows[i][c];
  return data;
}

void write_dataset_csv(std::ostream& os, const Dataset& data) {
  os.precision(17);
  for (int i = 0; i < data.n(); ++i) {
    for (int c = 0; c < data.dim(); ++c) {
      if (c) os << ',';
      os << data.points(i, c);
    }
    os << '\n';
  }
}

std::string run_result_to_json(const RunResult& result, double error, bool pretty) {
  json j{{"converged", result.converged},
         {"iterations", result.final_state.iteration},
         {"final_means", matrix_json(result.final_state.means)},
         {"final_weights", vector_json(result.final_state.weights)},
         {"error", error}};
  return j.dump(pretty ? 2 : -1);
}

}  // namespace overem
