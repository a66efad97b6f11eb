#include "sgg/box.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sgg {

void require_valid(const Box& b, const char* what) {
  if (!b.valid()) throw std::invalid_argument(std::string(what) + ": invalid box " + to_string(b));
}

Box union_box(const Box& a, const Box& b) {
  const double x0 = std::min(a.x, b.x);
  const double y0 = std::min(a.y, b.y);
  const double x1 = std::max(a.right(), b.right());
  const double y1 = std::max(a.bottom(), b.bottom());
  // Widened by ulps so that x0 + w >= x1 holds in floating point.
  double w = x1 - x0, h = y1 - y0;
  while (x0 + w < x1) w = std::nextafter(w, HUGE_VAL);
  while (y0 + h < y1) h = std::nextafter(h, HUGE_VAL);
  return Box{x0, y0, w, h};
}

double iou(const Box& a, const Box& b) {
  if (a == b) return 1.0;
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, std::nextafter(1.0, 0.0));
}

bool contains(const Box& outer, const Box& inner) {
  return outer.x <= inner.x && outer.y <= inner.y && outer.right() >= inner.right() &&
         outer.bottom() >= inner.bottom();
}

Box scale_box(const Box& b, double sx, double sy) { return Box{b.x * sx, b.y * sy, b.w * sx, b.h * sy}; }

std::string to_string(const Box& b) {
  std::ostringstream os;
  os << "[" << b.x << ", " << b.y << ", " << b.w << ", " << b.h << "]";
  return os.str();
}

}  // namespace sgg
