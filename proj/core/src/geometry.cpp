#include "eit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace eit {
namespace {

double normalize_angle(double phi) {
  phi = std::fmod(phi, kTwoPi);
  if (phi < 0.0) phi += kTwoPi;
  return phi;
}

int round_up(int n, int multiple) {
  if (multiple <= 1) return n;
  return ((n + multiple - 1) / multiple) * multiple;
}

}  // namespace

Partition::Partition(const PartitionSpec& spec) : spec_(spec) {
  if (spec.regions < 1) throw std::invalid_argument("partition: D must be >= 1");
  if (!(spec.r0 > 0.0 && spec.r0 < 1.0))
    throw std::invalid_argument("partition: r0 must lie in (0, 1)");
  switch (spec.layout) {
    case Layout::EqualSectors:
      sectors_ = spec.regions;
      radii_ = {spec.r0};
      break;
    case Layout::AnnularSectors: {
      if (spec.rings < 1 || spec.sectors_per_ring < 1)
        throw std::invalid_argument("partition: rings and sectors_per_ring must be >= 1");
      if (spec.rings * spec.sectors_per_ring != spec.regions)
        throw std::invalid_argument("partition: rings * sectors_per_ring must equal D");
      sectors_ = spec.sectors_per_ring;
      for (int j = 1; j <= spec.rings; ++j)
        radii_.push_back(spec.r0 * static_cast<double>(j) / spec.rings);
      radii_.back() = spec.r0;
      break;
    }
  }
}

int Partition::classify(double x, double y) const {
  const double r = std::hypot(x, y);
  if (r > spec_.r0) return 0;
  const auto ring = static_cast<int>(
      std::lower_bound(radii_.begin(), radii_.end(), r) - radii_.begin());
  const double width = kTwoPi / sectors_;
  int sector = static_cast<int>(normalize_angle(std::atan2(y, x)) / width);
  sector = std::clamp(sector, 0, sectors_ - 1);
  return 1 + std::min(ring, static_cast<int>(radii_.size()) - 1) * sectors_ + sector;
}

double Partition::region_area(int k) const {
  if (k < 0 || k > spec_.regions) throw std::out_of_range("partition: region index");
  if (k == 0) return kPi * (1.0 - spec_.r0 * spec_.r0);
  const int ring = (k - 1) / sectors_;
  const double outer = radii_[ring];
  const double inner = ring == 0 ? 0.0 : radii_[ring - 1];
  return 0.5 * (kTwoPi / sectors_) * (outer * outer - inner * inner);
}

Partition build_partition(const PartitionSpec& spec) { return Partition(spec); }

double Mesh::triangle_area(std::size_t t) const {
  const auto& tri = triangles[t];
  const Point& a = vertices[tri[0]];
  const Point& b = vertices[tri[1]];
  const Point& c = vertices[tri[2]];
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

double Mesh::max_edge_length() const {
  double longest = 0.0;
  for (const auto& tri : triangles) {
    for (int e = 0; e < 3; ++e) {
      const Point& p = vertices[tri[e]];
      const Point& q = vertices[tri[(e + 1) % 3]];
      longest = std::max(longest, std::hypot(p.x - q.x, p.y - q.y));
    }
  }
  return longest;
}

std::vector<bool> Mesh::boundary_mask() const {
  std::vector<bool> mask(vertices.size(), false);
  for (int v : boundary) mask[v] = true;
  return mask;
}

std::string Mesh::id() const {
  std::ostringstream os;
  os << "disk:h=" << target_h << ":D=" << region_count << ":nv=" << vertices.size()
     << ":nt=" << triangles.size();
  return os.str();
}

Mesh mesh_disk(const Partition& partition, double target_h, int boundary_multiple) {
  if (!(target_h > 0.0)) throw std::invalid_argument("mesh_disk: target_h must be > 0");
  if (boundary_multiple < 1) throw std::invalid_argument("mesh_disk: boundary_multiple must be >= 1");

  // Ring radii: every interface radius and the unit circle are exact rings.
  std::vector<double> breaks = partition.interface_radii();
  breaks.push_back(1.0);
  std::vector<double> radii;
  double previous = 0.0;
  for (double b : breaks) {
    const int steps = std::max(1, static_cast<int>(std::ceil((b - previous) / target_h - 1e-9)));
    for (int s = 1; s <= steps; ++s)
      radii.push_back(s == steps ? b : previous + (b - previous) * s / steps);
    previous = b;
  }

  Mesh mesh;
  mesh.region_count = partition.region_count();
  mesh.target_h = target_h;
  mesh.vertices.push_back({0.0, 0.0});

  const double r0 = partition.r0();
  std::vector<int> ring_start;
  std::vector<int> ring_size;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const double r = radii[i];
    int n = std::max(6, static_cast<int>(std::ceil(kTwoPi * r / target_h - 1e-9)));
    if (r <= r0 + 1e-14) n = round_up(n, partition.sectors());
    if (i + 1 == radii.size()) n = round_up(n, boundary_multiple);
    ring_start.push_back(static_cast<int>(mesh.vertices.size()));
    ring_size.push_back(n);
    for (int j = 0; j < n; ++j) {
      const double phi = kTwoPi * j / n;
      if (i + 1 == radii.size())
        mesh.vertices.push_back({std::cos(phi), std::sin(phi)});
      else
        mesh.vertices.push_back({r * std::cos(phi), r * std::sin(phi)});
    }
  }

  auto add_triangle = [&mesh](int a, int b, int c) {
    mesh.triangles.push_back({a, b, c});
    if (mesh.triangle_area(mesh.triangles.size() - 1) < 0.0)
      std::swap(mesh.triangles.back()[1], mesh.triangles.back()[2]);
  };

  // Fan around the center.
  for (int j = 0; j < ring_size[0]; ++j)
    add_triangle(0, ring_start[0] + j, ring_start[0] + (j + 1) % ring_size[0]);

  // Zip consecutive rings together by angle. Advancing whichever side has
  // the smaller next angle guarantees an edge between vertices that share
  // an angle, so sector rays become edge chains.
  for (std::size_t i = 0; i + 1 < radii.size(); ++i) {
    const long na = ring_size[i];
    const long nb = ring_size[i + 1];
    const int sa = ring_start[i];
    const int sb = ring_start[i + 1];
    long a = 0;
    long b = 0;
    while (a < na || b < nb) {
      const bool advance_a = b == nb || (a < na && (a + 1) * nb <= (b + 1) * na);
      if (advance_a) {
        add_triangle(sa + a, sa + (a + 1) % na, sb + b % nb);
        ++a;
      } else {
        add_triangle(sa + a % na, sb + b, sb + (b + 1) % nb);
        ++b;
      }
    }
  }

  mesh.labels.reserve(mesh.triangles.size());
  std::vector<int> per_label(partition.region_count() + 1, 0);
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    if (mesh.triangle_area(t) <= 1e-14) throw std::runtime_error("mesh_disk: degenerate triangle");
    const auto& tri = mesh.triangles[t];
    double cx = 0.0;
    double cy = 0.0;
    for (int v : tri) {
      cx += mesh.vertices[v].x / 3.0;
      cy += mesh.vertices[v].y / 3.0;
    }
    const int label = partition.classify(cx, cy);
    mesh.labels.push_back(label);
    ++per_label[label];
  }
  for (int k = 0; k <= partition.region_count(); ++k)
    if (per_label[k] == 0)
      throw std::invalid_argument("mesh_disk: target_h too coarse, region " + std::to_string(k) +
                                  " has no triangle");

  const int nb = ring_size.back();
  for (int j = 0; j < nb; ++j) {
    mesh.boundary.push_back(ring_start.back() + j);
    mesh.boundary_angle.push_back(kTwoPi * j / nb);
  }
  return mesh;
}

void write_mesh_csv(const Mesh& mesh, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream vertices(dir / "vertices.csv");
  vertices << std::setprecision(17) << "id,x,y\n";
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
    vertices << v << ',' << mesh.vertices[v].x << ',' << mesh.vertices[v].y << '\n';
  std::ofstream triangles(dir / "triangles.csv");
  triangles << "id,v1,v2,v3,label\n";
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    triangles << t << ',' << tri[0] << ',' << tri[1] << ',' << tri[2] << ',' << mesh.labels[t]
              << '\n';
  }
  if (!vertices || !triangles) throw std::runtime_error("write_mesh_csv: write failed");
}

double Arc::diameter() const {
  const double width = measure();
  return width >= kPi ? 2.0 : 2.0 * std::sin(0.5 * width);
}

double ElectrodeSet::covered_measure() const {
  double total = 0.0;
  for (const Arc& arc : arcs) total += arc.measure();
  return total;
}

ElectrodeSet ElectrodeSet::from_arcs(std::vector<Arc> arcs) {
  if (arcs.empty()) throw std::invalid_argument("electrodes: need at least one arc");
  std::vector<std::pair<double, double>> spans;
  for (const Arc& arc : arcs) {
    if (!(arc.measure() > 0.0) || arc.measure() > kTwoPi + 1e-12)
      throw std::invalid_argument("electrodes: arc measure must lie in (0, 2*pi]");
    const double begin = normalize_angle(arc.begin);
    spans.emplace_back(begin, begin + arc.measure());
  }
  std::sort(spans.begin(), spans.end());
  for (std::size_t k = 0; k < spans.size(); ++k) {
    const double next =
        k + 1 < spans.size() ? spans[k + 1].first : spans.front().first + kTwoPi;
    if (spans[k].second > next + 1e-12)
      throw std::invalid_argument("electrodes: arcs overlap");
  }
  ElectrodeSet set;
  set.nominal = arcs;
  set.arcs = std::move(arcs);
  return set;
}

ElectrodeSet place_electrodes(const Mesh& mesh, int count, double coverage) {
  if (count < 1) throw std::invalid_argument("place_electrodes: M must be >= 1");
  if (!(coverage > 0.0) || coverage > 1.0)
    throw std::invalid_argument("place_electrodes: coverage must lie in (0, 1]");
  const auto nb = static_cast<long>(mesh.boundary.size());
  if (2L * count > nb)
    throw std::invalid_argument("place_electrodes: M exceeds half the boundary vertex count");

  const double spacing = kTwoPi / static_cast<double>(nb);
  const double width = coverage * kTwoPi / count;
  ElectrodeSet set;
  for (int k = 0; k < count; ++k) {
    Arc nominal;
    nominal.begin = kTwoPi * k / count;
    nominal.end = nominal.begin + width;
    const long first = std::lround(nominal.begin / spacing);
    const long last = std::lround(nominal.end / spacing);
    if (last <= first)
      throw std::invalid_argument("place_electrodes: arc " + std::to_string(k) +
                                  " contains no boundary vertex");
    Arc snapped;
    snapped.begin = spacing * static_cast<double>(first);
    snapped.end = spacing * static_cast<double>(last);
    snapped.first_node = static_cast<int>(first % nb);
    snapped.node_count = static_cast<int>(last - first);
    set.snap_error = std::max({set.snap_error, std::abs(snapped.begin - nominal.begin),
                               std::abs(snapped.end - nominal.end)});
    set.nominal.push_back(nominal);
    set.arcs.push_back(snapped);
  }
  return set;
}

double electrode_gap_stat(const ElectrodeSet& electrodes) {
  double widest = 0.0;
  for (const Arc& arc : electrodes.arcs) widest = std::max(widest, arc.diameter());
  double uncovered = kTwoPi - electrodes.covered_measure();
  // full coverage leaves only rounding residue
  if (uncovered < 1e-12) uncovered = 0.0;
  return std::sqrt(uncovered) + widest;
}

}  // namespace eit
