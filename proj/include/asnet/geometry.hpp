#pragma once

#include <algorithm>
#include <cmath>

// Box representations, IoU/GIoU and interaction-vector construction.
// All coordinates are normalized image coordinates.

namespace asnet {

// center/size box (cx, cy, w, h)
struct BoxCxCyWH {
    double cx = 0.0, cy = 0.0, w = 0.0, h = 0.0;

    bool operator==(const BoxCxCyWH&) const = default;
};

// corner box (x0, y0, x1, y1), x0 <= x1 and y0 <= y1
struct BoxXYXY {
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

    double area() const { return (x1 - x0) * (y1 - y0); }
    bool operator==(const BoxXYXY&) const = default;
};

// endpoint pair of an interaction vector: human center then object center
struct CenterPair {
    double xh = 0.0, yh = 0.0, xo = 0.0, yo = 0.0;

    bool operator==(const CenterPair&) const = default;
};

inline BoxXYXY to_xyxy(const BoxCxCyWH& b) {
    return {b.cx - b.w / 2.0, b.cy - b.h / 2.0, b.cx + b.w / 2.0, b.cy + b.h / 2.0};
}

inline BoxCxCyWH to_cxcywh(const BoxXYXY& b) {
    return {(b.x0 + b.x1) / 2.0, (b.y0 + b.y1) / 2.0, b.x1 - b.x0, b.y1 - b.y0};
}

// intersection / union; 0 when the union has zero area
inline double iou(const BoxXYXY& a, const BoxXYXY& b) {
    const double iw = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
    const double ih = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
    const double inter = (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

// IoU minus the normalized empty hull fraction. Falls back to plain IoU
// when the enclosing hull itself is degenerate.
inline double giou(const BoxXYXY& a, const BoxXYXY& b) {
    const double iw = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
    const double ih = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
    const double inter = (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
    const double uni = a.area() + b.area() - inter;
    const double hull =
        (std::max(a.x1, b.x1) - std::min(a.x0, b.x0)) * (std::max(a.y1, b.y1) - std::min(a.y0, b.y0));
    const double overlap = uni > 0.0 ? inter / uni : 0.0;
    if (hull <= 0.0) return overlap;
    return overlap - (hull - uni) / hull;
}

inline CenterPair interaction_vector(const BoxCxCyWH& human, const BoxCxCyWH& object) {
    return {human.cx, human.cy, object.cx, object.cy};
}

}  // namespace asnet
