#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <string>

#include "eit/forward.hpp"
#include "eit/inference.hpp"
#include "eit/statmodel.hpp"

namespace eit::cli {

// 17 significant digits (%.17g), which round-trips binary64 exactly.
std::string format_double(double value);

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

// Columns i,j,k,value with 1-based indices.
void write_sensitivity_csv(const std::filesystem::path& path, const SensitivityTensor& s);

// Header "i,x,y_1,...,y_M", one row per observation, x 1-based.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset_csv(const std::filesystem::path& path);

// Header "iter,theta_1,...,theta_D,log_post".
void write_chain_csv(const std::filesystem::path& path, const Chain& chain, int burnin, int thin);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace eit::cli
