#pragma once

#include <string>

namespace sgg {

// Axis-aligned rectangle: (x, y) is the top-left corner, w/h are extents in pixels.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }
  double right() const { return x + w; }
  double bottom() const { return y + h; }
  double center_x() const { return x + 0.5 * w; }
  double center_y() const { return y + 0.5 * h; }
  bool valid() const { return w > 0.0 && h > 0.0; }

  friend bool operator==(const Box&, const Box&) = default;
};

// Throws std::invalid_argument when w <= 0 or h <= 0.
void require_valid(const Box& b, const char* what);

// Smallest axis-aligned box containing both a and b.
Box union_box(const Box& a, const Box& b);

// Intersection over union in [0, 1].
double iou(const Box& a, const Box& b);

bool contains(const Box& outer, const Box& inner);

Box scale_box(const Box& b, double sx, double sy);

std::string to_string(const Box& b);

}  // namespace sgg
