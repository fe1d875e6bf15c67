#include "eit/cli/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace eit::cli {
namespace {

std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

double parse_double(const std::string& text, const std::filesystem::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() && text.find_first_not_of(" \r", used) != std::string::npos)
      throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("bad number '" + text + "' in " + path.string());
  }
}

}  // namespace

std::string format_double(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  auto out = open_for_write(path);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& f : split(line)) row.push_back(parse_double(f, path));
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != m.cols())
      throw std::runtime_error("ragged matrix in " + path.string());
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

void write_sensitivity_csv(const std::filesystem::path& path, const SensitivityTensor& s) {
  auto out = open_for_write(path);
  out << "i,j,k,value\n";
  for (int i = 0; i < s.electrodes(); ++i)
    for (int j = 0; j < s.electrodes(); ++j)
      for (int k = 0; k < s.dimension(); ++k)
        out << i + 1 << ',' << j + 1 << ',' << k + 1 << ',' << format_double(s(i, j, k)) << '\n';
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
  auto out = open_for_write(path);
  out << "i,x";
  for (int j = 0; j < data.electrodes(); ++j) out << ",y_" << j + 1;
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << i + 1 << ',' << data.x[i] + 1;
    for (int j = 0; j < data.electrodes(); ++j)
      out << ',' << format_double(data.y(static_cast<Eigen::Index>(i), j));
    out << '\n';
  }
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty dataset file " + path.string());
  const auto header = split(line);
  if (header.size() < 3 || header[0] != "i" || header[1] != "x")
    throw std::runtime_error("dataset header must start with i,x,y_1 in " + path.string());
  const auto m = static_cast<int>(header.size() - 2);
  std::vector<int> xs;
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split(line);
    if (static_cast<int>(fields.size()) != m + 2)
      throw std::runtime_error("dataset row has wrong width in " + path.string());
    const int x = static_cast<int>(parse_double(fields[1], path));
    if (x < 1 || x > m) throw std::runtime_error("design index out of range in " + path.string());
    xs.push_back(x - 1);
    for (int j = 0; j < m; ++j) values.push_back(parse_double(fields[j + 2], path));
  }
  Dataset data;
  data.x = std::move(xs);
  data.y = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), static_cast<Eigen::Index>(data.x.size()), m);
  return data;
}

void write_chain_csv(const std::filesystem::path& path, const Chain& chain, int burnin, int thin) {
  auto out = open_for_write(path);
  out << "iter";
  for (int k = 0; k < chain.dimension(); ++k) out << ",theta_" << k + 1;
  out << ",log_post\n";
  for (int s = 0; s < chain.size(); ++s) {
    out << burnin + s * thin;
    for (int k = 0; k < chain.dimension(); ++k) out << ',' << format_double(chain.samples(s, k));
    out << ',' << format_double(chain.log_posts[s]) << '\n';
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_for_write(path);
  out << text;
}

}  // namespace eit::cli
