#include <algorithm>
#include <array>
#include <numeric>

#include "nti/vision/vision.hpp"

namespace nti::vision {

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](auto v) { return v != 0; }));
}

int otsu_threshold(const Image& image) {
  std::array<double, 256> hist{};
  for (auto p : image.pixels) hist[p] += 1.0;
  const double total = static_cast<double>(image.pixels.size());
  if (total == 0.0) return 255;
  double sum_all = 0.0;
  for (int i = 0; i < 256; ++i) sum_all += i * hist[i];
  double w0 = 0.0, sum0 = 0.0, best = -1.0;
  int threshold = 0;
  for (int t = 0; t < 256; ++t) {
    w0 += hist[t];
    sum0 += t * hist[t];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double m0 = sum0 / w0;
    const double m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      threshold = t;
    }
  }
  return threshold;
}

Mask OtsuSegmenter::segment(const Image& image) const {
  Mask mask(image.width, image.height);
  const int t = otsu_threshold(image);
  double s0 = 0.0, s1 = 0.0, n0 = 0.0, n1 = 0.0;
  for (auto p : image.pixels) {
    if (p > t) {
      s1 += p;
      n1 += 1.0;
    } else {
      s0 += p;
      n0 += 1.0;
    }
  }
  if (n0 == 0.0 || n1 == 0.0 || s1 / n1 - s0 / n0 < min_contrast_) return mask;
  for (std::size_t i = 0; i < image.pixels.size(); ++i) mask.data[i] = image.pixels[i] > t ? 1 : 0;
  return mask;
}

Mask segment_coarse(const Image& image) { return OtsuSegmenter().segment(image); }

std::vector<Component> extract_components(const Mask& mask, std::size_t area_threshold) {
  std::vector<int> label(mask.data.size(), -1);
  std::vector<Component> out;
  std::vector<Pixel> stack;
  int next = 0;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * mask.width + x;
      if (!mask.data[idx] || label[idx] >= 0) continue;
      Component c;
      c.min_x = c.max_x = x;
      c.min_y = c.max_y = y;
      label[idx] = next;
      stack.push_back({x, y});
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        c.pixels.push_back(p);
        c.min_x = std::min(c.min_x, p.x);
        c.max_x = std::max(c.max_x, p.x);
        c.min_y = std::min(c.min_y, p.y);
        c.max_y = std::max(c.max_y, p.y);
        constexpr int dx[4] = {1, -1, 0, 0};
        constexpr int dy[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nx = p.x + dx[k];
          const int ny = p.y + dy[k];
          if (!mask.contains(nx, ny)) continue;
          const std::size_t nidx = static_cast<std::size_t>(ny) * mask.width + nx;
          if (mask.data[nidx] && label[nidx] < 0) {
            label[nidx] = next;
            stack.push_back({nx, ny});
          }
        }
      }
      ++next;
      if (c.area() <= area_threshold) continue;
      std::sort(c.pixels.begin(), c.pixels.end(),
                [](const Pixel& a, const Pixel& b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });
      out.push_back(std::move(c));
    }
  }
  return out;
}

}  // namespace nti::vision
