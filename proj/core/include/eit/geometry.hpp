#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace eit {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

enum class Layout { EqualSectors, AnnularSectors };

// Describes how the inner disk {r <= r0} is cut into the unknown regions.
// Region 0 is everything else, in particular the collar r0 < r <= 1.
struct PartitionSpec {
  int regions = 1;
  double r0 = 0.75;
  Layout layout = Layout::EqualSectors;
  // Only used by AnnularSectors.
  int rings = 1;
  int sectors_per_ring = 1;
};

// Region classifier for the unit disk. Immutable after construction.
class Partition {
 public:
  explicit Partition(const PartitionSpec& spec);

  const PartitionSpec& spec() const { return spec_; }
  int region_count() const { return spec_.regions; }
  double r0() const { return spec_.r0; }

  // Number of angular sectors every inner ring is split into.
  int sectors() const { return sectors_; }
  // Radii of the inner interfaces, increasing, last one equal to r0.
  const std::vector<double>& interface_radii() const { return radii_; }

  // Region index in {0, ..., D} of the point (x, y).
  int classify(double x, double y) const;

  // Exact area of region k (k = 0 is the collar region).
  double region_area(int k) const;

 private:
  PartitionSpec spec_;
  int sectors_ = 1;
  std::vector<double> radii_;
};

Partition build_partition(const PartitionSpec& spec);

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Mesh {
  std::vector<Point> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> labels;               // per triangle, in {0, ..., D}
  std::vector<int> boundary;             // vertex ids on |x| = 1, ordered by angle
  std::vector<double> boundary_angle;    // angle of boundary[j], equal to 2*pi*j/size
  int region_count = 0;
  double target_h = 0.0;

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t triangle_count() const { return triangles.size(); }
  double triangle_area(std::size_t t) const;  // signed
  double max_edge_length() const;
  double boundary_spacing() const { return kTwoPi / static_cast<double>(boundary.size()); }
  std::vector<bool> boundary_mask() const;
  // Short provenance tag, e.g. "disk:h=0.05:D=2:nv=1234".
  std::string id() const;
};

// Structured polar triangulation that resolves every interface ring and
// sector ray of the partition. The boundary ring gets a multiple of
// `boundary_multiple` vertices so electrodes can be placed without snapping.
Mesh mesh_disk(const Partition& partition, double target_h, int boundary_multiple = 1);

void write_mesh_csv(const Mesh& mesh, const std::filesystem::path& dir);

// Half-open boundary arc [begin, end) in radians, end may exceed 2*pi when
// the arc wraps. `first_node`/`node_count` index into Mesh::boundary when the
// arc has been snapped to a mesh; node_count == 0 for free arcs.
struct Arc {
  double begin = 0.0;
  double end = 0.0;
  int first_node = -1;
  int node_count = 0;

  double measure() const { return end - begin; }
  double diameter() const;
};

struct ElectrodeSet {
  std::vector<Arc> arcs;
  std::vector<Arc> nominal;     // requested arcs before snapping
  double snap_error = 0.0;      // max endpoint displacement, radians

  std::size_t size() const { return arcs.size(); }
  double measure(std::size_t k) const { return arcs[k].measure(); }
  double diameter(std::size_t k) const { return arcs[k].diameter(); }
  double covered_measure() const;

  // Validated set of free arcs (pairwise disjoint, positive measure).
  static ElectrodeSet from_arcs(std::vector<Arc> arcs);
};

ElectrodeSet place_electrodes(const Mesh& mesh, int count, double coverage);

// |boundary \ union J_k|^(1/2) + max_k diam(J_k).
double electrode_gap_stat(const ElectrodeSet& electrodes);

}  // namespace eit
