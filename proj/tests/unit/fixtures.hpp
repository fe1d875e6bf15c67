#pragma once

#include "eit/forward.hpp"
#include "eit/geometry.hpp"

namespace eit::test {

inline ForwardModel make_model(int regions, double r0, double h, int electrodes = 16,
                               double coverage = 1.0, double gmin = 0.5, double gmax = 4.0) {
  PartitionSpec spec;
  spec.regions = regions;
  spec.r0 = r0;
  Mesh mesh = mesh_disk(build_partition(spec), h, 4 * electrodes);
  ElectrodeSet set = place_electrodes(mesh, electrodes, coverage);
  return ForwardModel(std::move(mesh), std::move(set), ParameterBox{regions, gmin, gmax});
}

inline ForwardModel canonical_model(double h = 0.05) { return make_model(2, 0.75, h); }

inline Theta theta_of(std::initializer_list<double> values) {
  Theta t(static_cast<Eigen::Index>(values.size()));
  Eigen::Index k = 0;
  for (double v : values) t[k++] = v;
  return t;
}

}  // namespace eit::test
