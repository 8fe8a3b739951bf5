#include <algorithm>
#include <cmath>

#include "nti/vision/vision.hpp"

namespace nti::vision {
namespace {

// Neighbour offsets clockwise from north: P2..P9 in Zhang-Suen notation.
constexpr int kDx[8] = {0, 1, 1, 1, 0, -1, -1, -1};
constexpr int kDy[8] = {-1, -1, 0, 1, 1, 1, 0, -1};

// Binary grid covering one component with a one-pixel border.
struct Grid {
  int ox = 0, oy = 0;
  Mask cells;

  explicit Grid(const Component& c)
      : ox(c.min_x - 1), oy(c.min_y - 1), cells(c.max_x - c.min_x + 3, c.max_y - c.min_y + 3) {
    for (const Pixel& p : c.pixels) cells.at(p.x - ox, p.y - oy) = 1;
  }

  bool on(int x, int y) const { return cells.set(x, y); }

  int neighbours(int x, int y) const {
    int n = 0;
    for (int k = 0; k < 8; ++k) n += on(x + kDx[k], y + kDy[k]) ? 1 : 0;
    return n;
  }

  // 0->1 transitions around the ring.
  int transitions(int x, int y) const {
    int a = 0;
    for (int k = 0; k < 8; ++k) {
      if (!on(x + kDx[k], y + kDy[k]) && on(x + kDx[(k + 1) % 8], y + kDy[(k + 1) % 8])) ++a;
    }
    return a;
  }

  // Number of 8-connected groups among the set neighbours of (x, y).
  int neighbour_groups(int x, int y) const {
    int group[8];
    int count = 0;
    for (int k = 0; k < 8; ++k) group[k] = on(x + kDx[k], y + kDy[k]) ? -1 : -2;
    for (int k = 0; k < 8; ++k) {
      if (group[k] != -1) continue;
      group[k] = count;
      bool grew = true;
      while (grew) {
        grew = false;
        for (int i = 0; i < 8; ++i) {
          if (group[i] != count) continue;
          for (int j = 0; j < 8; ++j) {
            if (group[j] != -1) continue;
            if (std::abs(kDx[i] - kDx[j]) <= 1 && std::abs(kDy[i] - kDy[j]) <= 1) {
              group[j] = count;
              grew = true;
            }
          }
        }
      }
      ++count;
    }
    return count;
  }
};

void zhang_suen(Grid& g) {
  std::vector<std::pair<int, int>> remove;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      remove.clear();
      for (int y = 1; y + 1 < g.cells.height; ++y) {
        for (int x = 1; x + 1 < g.cells.width; ++x) {
          if (!g.on(x, y)) continue;
          const int b = g.neighbours(x, y);
          if (b < 2 || b > 6 || g.transitions(x, y) != 1) continue;
          const bool p2 = g.on(x, y - 1), p4 = g.on(x + 1, y), p6 = g.on(x, y + 1), p8 = g.on(x - 1, y);
          const bool ok = pass == 0 ? (!(p2 && p4 && p6) && !(p4 && p6 && p8))
                                    : (!(p2 && p4 && p8) && !(p2 && p6 && p8));
          if (ok) remove.emplace_back(x, y);
        }
      }
      for (auto [x, y] : remove) g.cells.at(x, y) = 0;
      changed = changed || !remove.empty();
    }
  }
}

// Drops pixels whose neighbours stay connected without them (staircase corners).
void remove_redundant(Grid& g) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (int y = 1; y + 1 < g.cells.height; ++y) {
      for (int x = 1; x + 1 < g.cells.width; ++x) {
        if (!g.on(x, y)) continue;
        if (g.neighbours(x, y) >= 2 && g.neighbour_groups(x, y) == 1) {
          g.cells.at(x, y) = 0;
          changed = true;
        }
      }
    }
  }
}

struct Topology {
  std::vector<Pixel> endpoints;
  int junctions = 0;
};

Topology topology(const Grid& g) {
  Topology t;
  Mask junction(g.cells.width, g.cells.height);
  for (int y = 0; y < g.cells.height; ++y) {
    for (int x = 0; x < g.cells.width; ++x) {
      if (!g.on(x, y)) continue;
      const int n = g.neighbours(x, y);
      if (n == 1) t.endpoints.push_back({x, y});
      if (n >= 3) junction.at(x, y) = 1;
    }
  }
  // Adjacent junction pixels form one junction.
  for (int y = 0; y < junction.height; ++y) {
    for (int x = 0; x < junction.width; ++x) {
      if (!junction.at(x, y)) continue;
      ++t.junctions;
      std::vector<Pixel> stack{{x, y}};
      junction.at(x, y) = 0;
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        for (int k = 0; k < 8; ++k) {
          const int nx = p.x + kDx[k], ny = p.y + kDy[k];
          if (junction.set(nx, ny)) {
            junction.at(nx, ny) = 0;
            stack.push_back({nx, ny});
          }
        }
      }
    }
  }
  return t;
}

// Removes end branches of at most `max_len` pixels that end in a junction.
bool prune_spurs(Grid& g, int max_len) {
  bool pruned = false;
  const Topology t = topology(g);
  if (t.junctions == 0) return false;
  for (const Pixel& e : t.endpoints) {
    std::vector<Pixel> path{e};
    Pixel prev{-1, -1};
    Pixel cur = e;
    bool hit_junction = false;
    while (static_cast<int>(path.size()) <= max_len) {
      Pixel next{-1, -1};
      int options = 0;
      for (int k = 0; k < 8; ++k) {
        const Pixel n{cur.x + kDx[k], cur.y + kDy[k]};
        if (!g.on(n.x, n.y) || n == prev) continue;
        if (std::find(path.begin(), path.end(), n) != path.end()) continue;
        ++options;
        next = n;
      }
      if (options == 0) break;
      if (g.neighbours(next.x, next.y) >= 3 || options > 1) {
        hit_junction = true;
        break;
      }
      prev = cur;
      cur = next;
      path.push_back(cur);
    }
    if (hit_junction && static_cast<int>(path.size()) <= max_len) {
      for (const Pixel& p : path) g.cells.at(p.x, p.y) = 0;
      pruned = true;
    }
  }
  return pruned;
}

std::vector<Pixel> order_curve(const Grid& g, Pixel start) {
  std::vector<Pixel> out{start};
  Mask seen(g.cells.width, g.cells.height);
  seen.at(start.x, start.y) = 1;
  Pixel cur = start;
  while (true) {
    Pixel next{-1, -1};
    // Prefer edge neighbours so diagonal shortcuts do not skip pixels.
    for (int k = 0; k < 8 && next.x < 0; k += 2) {
      const Pixel n{cur.x + kDx[k], cur.y + kDy[k]};
      if (g.on(n.x, n.y) && !seen.at(n.x, n.y)) next = n;
    }
    for (int k = 1; k < 8 && next.x < 0; k += 2) {
      const Pixel n{cur.x + kDx[k], cur.y + kDy[k]};
      if (g.on(n.x, n.y) && !seen.at(n.x, n.y)) next = n;
    }
    if (next.x < 0) break;
    seen.at(next.x, next.y) = 1;
    out.push_back(next);
    cur = next;
  }
  return out;
}

double polyline_length(const std::vector<Pixel>& pts) {
  double len = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    len += std::hypot(pts[i].x - pts[i - 1].x, pts[i].y - pts[i - 1].y);
  }
  return len;
}

// Thinning bends the last half-width of a curve towards the corners of its end. Drops that
// stretch, then walks along the direction of the preceding stretch while inside the component.
// Returns the number of points appended.
std::size_t extend_end(const Grid& component, std::vector<Pixel>& pts, double half_width) {
  const auto trim = static_cast<std::size_t>(std::lround(half_width));
  const std::size_t window = std::max<std::size_t>(5, 2 * trim);
  if (pts.size() > trim + window + 2) pts.resize(pts.size() - trim);
  if (pts.size() < 2) return 0;
  const std::size_t before = pts.size();
  const Pixel end = pts.back();
  const Pixel ref = pts[pts.size() - 1 - std::min(window, pts.size() - 1)];
  const double dx = end.x - ref.x;
  const double dy = end.y - ref.y;
  const double norm = std::hypot(dx, dy);
  if (norm == 0.0) return 0;
  for (int step = 1;; ++step) {
    const Pixel q{end.x + static_cast<int>(std::lround(step * dx / norm)),
                  end.y + static_cast<int>(std::lround(step * dy / norm))};
    if (!component.on(q.x, q.y)) break;
    if (!(q == pts.back())) pts.push_back(q);
  }
  return pts.size() - before;
}

}  // namespace

double Skeleton::mean_x() const {
  if (points.empty()) return 0.0;
  double s = 0.0;
  for (const Pixel& p : points) s += p.x;
  return s / static_cast<double>(points.size());
}

Skeleton thin_component(const Component& component, const SkeletonFilter& filter) {
  const Grid original(component);
  Grid g = original;
  zhang_suen(g);
  remove_redundant(g);
  while (prune_spurs(g, filter.spur_length)) remove_redundant(g);

  const Topology t = topology(g);
  Skeleton s;
  s.endpoints = static_cast<int>(t.endpoints.size());
  s.junctions = t.junctions;
  if (s.endpoints == 2 && s.junctions == 0) {
    Pixel start = t.endpoints[0];
    const Pixel other = t.endpoints[1];
    if (other.x < start.x || (other.x == start.x && other.y < start.y)) start = other;
    s.points = order_curve(g, start);
    if (filter.extend_to_edge) {
      const double half_width =
          0.5 * static_cast<double>(component.area()) / (polyline_length(s.points) + 1.0);
      s.extended_back = extend_end(original, s.points, half_width);
      std::reverse(s.points.begin(), s.points.end());
      s.extended_front = extend_end(original, s.points, half_width);
      std::reverse(s.points.begin(), s.points.end());
    }
  } else {
    for (int y = 0; y < g.cells.height; ++y) {
      for (int x = 0; x < g.cells.width; ++x) {
        if (g.on(x, y)) s.points.push_back({x, y});
      }
    }
  }
  for (Pixel& p : s.points) {
    p.x += g.ox;
    p.y += g.oy;
  }
  s.length = (s.endpoints == 2 && s.junctions == 0) ? polyline_length(s.points)
                                                     : static_cast<double>(s.points.size());
  s.mean_width = static_cast<double>(component.area()) / (s.length + 1.0);
  return s;
}

bool passes_filter(const Skeleton& s, const SkeletonFilter& f) {
  return s.endpoints == 2 && s.junctions == 0 && s.points.size() >= 2 && s.length >= f.min_length &&
         s.length <= f.max_length && s.mean_width >= f.min_width && s.mean_width <= f.max_width;
}

std::vector<Skeleton> thin_and_filter(std::span<const Component> components,
                                      const SkeletonFilter& filter) {
  std::vector<Skeleton> out;
  for (const Component& c : components) {
    Skeleton s = thin_component(c, filter);
    if (passes_filter(s, filter)) out.push_back(std::move(s));
  }
  return out;
}

std::optional<Skeleton> select_tube(std::span<const Skeleton> candidates) {
  const Skeleton* best = nullptr;
  auto key_less = [](const Skeleton& a, const Skeleton& b) {
    const double ma = a.mean_x(), mb = b.mean_x();
    if (ma != mb) return ma < mb;
    if (a.length != b.length) return a.length < b.length;
    return std::lexicographical_compare(
        b.points.begin(), b.points.end(), a.points.begin(), a.points.end(),
        [](const Pixel& p, const Pixel& q) { return p.x != q.x ? p.x < q.x : p.y < q.y; });
  };
  for (const Skeleton& s : candidates) {
    if (best == nullptr || key_less(*best, s)) best = &s;
  }
  if (best == nullptr) return std::nullopt;
  return *best;
}

}  // namespace nti::vision
