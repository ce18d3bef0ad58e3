#pragma once

// Sutherland-Hodgman clipping of screen-space polygons against the image
// rectangle, near-plane clipping in camera space, and triangulation of
// concave map polygons into convex pieces.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "rasterdrive/geometry.hpp"

namespace rasterdrive {

struct ClipVertex {
    double u = 0.0;
    double v = 0.0;
    double depth = 0.0;
    friend bool operator==(const ClipVertex&, const ClipVertex&) = default;
};

struct Polygon2D {
    std::vector<ClipVertex> vertices;

    bool empty() const { return vertices.empty(); }
    std::size_t size() const { return vertices.size(); }
};

struct ClipRect {
    double u_min = 0.0;
    double u_max = 1.0;
    double v_min = 0.0;
    double v_max = 1.0;

    bool is_valid() const { return u_min < u_max && v_min < v_max; }
    bool contains(const ClipVertex& p) const {
        return p.u >= u_min && p.u <= u_max && p.v >= v_min && p.v <= v_max;
    }
};

/// Shoelace signed area in (u, v); positive for counter-clockwise in a
/// y-up reading.
inline double signed_area(const Polygon2D& poly) {
    const auto& vs = poly.vertices;
    double a = 0.0;
    for (std::size_t i = 0, j = vs.size() - 1; i < vs.size(); j = i++)
        a += vs[j].u * vs[i].v - vs[i].u * vs[j].v;
    return vs.empty() ? 0.0 : 0.5 * a;
}

inline double area(const Polygon2D& poly) { return std::abs(signed_area(poly)); }

namespace detail {

enum class Edge { left, right, bottom, top };

inline bool inside(const ClipVertex& p, Edge e, const ClipRect& r) {
    switch (e) {
        case Edge::left: return p.u >= r.u_min;
        case Edge::right: return p.u <= r.u_max;
        case Edge::bottom: return p.v >= r.v_min;
        case Edge::top: return p.v <= r.v_max;
    }
    return false;
}

/// Crossing of segment a->b with the boundary line of `e`. The clipped
/// coordinate is pinned to the boundary so containment holds exactly.
inline ClipVertex crossing(const ClipVertex& a, const ClipVertex& b, Edge e, const ClipRect& r) {
    const bool vertical = e == Edge::left || e == Edge::right;
    const double bound = e == Edge::left    ? r.u_min
                         : e == Edge::right ? r.u_max
                         : e == Edge::bottom ? r.v_min
                                             : r.v_max;
    const double a0 = vertical ? a.u : a.v;
    const double b0 = vertical ? b.u : b.v;
    const double t = (bound - a0) / (b0 - a0);
    ClipVertex out{a.u + t * (b.u - a.u), a.v + t * (b.v - a.v), a.depth + t * (b.depth - a.depth)};
    if (vertical)
        out.u = bound;
    else
        out.v = bound;
    return out;
}

inline void push_unique(std::vector<ClipVertex>& out, const ClipVertex& p) {
    if (out.empty() || !(out.back() == p)) out.push_back(p);
}

inline std::vector<ClipVertex> clip_edge(const std::vector<ClipVertex>& in, Edge e,
                                         const ClipRect& r) {
    std::vector<ClipVertex> out;
    out.reserve(in.size() + 2);
    const std::size_t n = in.size();
    for (std::size_t i = 0; i < n; ++i) {
        const ClipVertex& prev = in[(i + n - 1) % n];
        const ClipVertex& cur = in[i];
        const bool prev_in = inside(prev, e, r);
        const bool cur_in = inside(cur, e, r);
        if (cur_in) {
            if (!prev_in) push_unique(out, crossing(prev, cur, e, r));
            push_unique(out, cur);
        } else if (prev_in) {
            push_unique(out, crossing(prev, cur, e, r));
        }
    }
    if (out.size() > 1 && out.front() == out.back()) out.pop_back();
    return out;
}

}  // namespace detail

/// Intersection of `poly` with `rect` by four successive half-plane clips
/// (left, right, bottom, top). Depth is interpolated linearly along each
/// crossed edge. Fewer than three surviving vertices yields an empty polygon.
inline Polygon2D clip_polygon(const Polygon2D& poly, const ClipRect& rect) {
    if (poly.vertices.size() < 3) return {};
    std::vector<ClipVertex> cur = poly.vertices;
    for (auto e : {detail::Edge::left, detail::Edge::right, detail::Edge::bottom, detail::Edge::top}) {
        cur = detail::clip_edge(cur, e, rect);
        if (cur.size() < 3) return {};
    }
    return {std::move(cur)};
}

namespace detail {

// Point of segment a-b at depth z. Endpoints are taken in increasing-z order
// so an edge shared by two polygons yields bit-identical crossings.
inline Vec3 cross_z(const Vec3& a, const Vec3& b, double z) {
    const Vec3& lo = a.z() <= b.z() ? a : b;
    const Vec3& hi = a.z() <= b.z() ? b : a;
    const double t = (z - lo.z()) / (hi.z() - lo.z());
    Vec3 x = lo + t * (hi - lo);
    x.z() = z;
    return x;
}

}  // namespace detail

/// Part of the camera-frame segment p0-p1 with z >= z_near.
inline std::optional<std::pair<Vec3, Vec3>> clip_segment_near(const Vec3& p0, const Vec3& p1,
                                                              double z_near) {
    const bool in0 = p0.z() >= z_near;
    const bool in1 = p1.z() >= z_near;
    if (in0 && in1) return std::pair{p0, p1};
    if (!in0 && !in1) return std::nullopt;
    const Vec3 x = detail::cross_z(p0, p1, z_near);
    if (in0) return std::pair{p0, x};
    return std::pair{x, p1};
}

/// Sutherland-Hodgman against the single plane z = z_near, camera frame.
inline std::vector<Vec3> clip_polygon_near(const std::vector<Vec3>& poly, double z_near) {
    std::vector<Vec3> out;
    const std::size_t n = poly.size();
    out.reserve(n + 1);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3& prev = poly[(i + n - 1) % n];
        const Vec3& cur = poly[i];
        const bool prev_in = prev.z() >= z_near;
        const bool cur_in = cur.z() >= z_near;
        if (cur_in != prev_in) out.push_back(detail::cross_z(prev, cur, z_near));
        if (cur_in) out.push_back(cur);
    }
    if (out.size() < 3) out.clear();
    return out;
}

/// Depth planes z_near * ratio^k strictly inside (z_lo, z_hi), ascending.
inline std::vector<double> depth_planes(double z_lo, double z_hi, double z_near, double ratio) {
    std::vector<double> planes;
    if (!(z_hi > z_lo * ratio)) return planes;
    const double step = std::log(ratio);
    auto k = static_cast<long>(std::floor(std::log(z_lo / z_near) / step));
    for (;; ++k) {
        const double z = z_near * std::exp(static_cast<double>(k) * step);
        if (z >= z_hi) break;
        if (z > z_lo) planes.push_back(z);
    }
    return planes;
}

/// Splits a convex camera-frame polygon (all z >= z_near) into slices whose
/// depth range stays within `ratio`, cutting at the global planes
/// z_near * ratio^k. Bounds the error of screen-space depth interpolation.
inline std::vector<std::vector<Vec3>> slice_polygon_depth(const std::vector<Vec3>& poly, double z_near,
                                                          double ratio) {
    double z_lo = std::numeric_limits<double>::infinity(), z_hi = -z_lo;
    for (const auto& p : poly) {
        z_lo = std::min(z_lo, p.z());
        z_hi = std::max(z_hi, p.z());
    }
    const auto planes = depth_planes(z_lo, z_hi, z_near, ratio);
    if (planes.empty()) return {poly};
    std::vector<std::vector<Vec3>> out;
    std::vector<Vec3> rest = poly;
    for (double z : planes) {
        std::vector<Vec3> below, above;
        const std::size_t n = rest.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Vec3& prev = rest[(i + n - 1) % n];
            const Vec3& cur = rest[i];
            if ((prev.z() < z && cur.z() > z) || (prev.z() > z && cur.z() < z)) {
                const Vec3 x = detail::cross_z(prev, cur, z);
                below.push_back(x);
                above.push_back(x);
            }
            if (cur.z() <= z) below.push_back(cur);
            if (cur.z() >= z) above.push_back(cur);
        }
        if (below.size() >= 3) out.push_back(std::move(below));
        rest = std::move(above);
        if (rest.size() < 3) return out;
    }
    out.push_back(std::move(rest));
    return out;
}

/// Splits a camera-frame segment (both z >= z_near) at the same depth planes.
inline std::vector<Vec3> slice_segment_depth(const Vec3& p0, const Vec3& p1, double z_near, double ratio) {
    std::vector<Vec3> pts{p0};
    const bool rising = p0.z() <= p1.z();
    auto planes = depth_planes(std::min(p0.z(), p1.z()), std::max(p0.z(), p1.z()), z_near, ratio);
    if (!rising) std::reverse(planes.begin(), planes.end());
    for (double z : planes) pts.push_back(detail::cross_z(p0, p1, z));
    pts.push_back(p1);
    return pts;
}

namespace detail {

inline double cross2(double ax, double ay, double bx, double by, double cx, double cy) {
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
}

}  // namespace detail

/// Triangulates a simple polygon given as 2D points by ear clipping. Returns
/// index triples into `pts`, each wound like the input polygon. Convex input
/// degenerates to a fan from vertex 0.
inline std::vector<std::array<int, 3>> triangulate(const std::vector<std::array<double, 2>>& pts) {
    std::vector<std::array<int, 3>> tris;
    const int n = static_cast<int>(pts.size());
    if (n < 3) return tris;

    double twice_area = 0.0;
    for (int i = 0, j = n - 1; i < n; j = i++)
        twice_area += pts[j][0] * pts[i][1] - pts[i][0] * pts[j][1];
    const double orient = twice_area >= 0.0 ? 1.0 : -1.0;

    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;

    auto is_ear = [&](int a, int b, int c) {
        const auto& A = pts[a];
        const auto& B = pts[b];
        const auto& C = pts[c];
        if (orient * detail::cross2(A[0], A[1], B[0], B[1], C[0], C[1]) <= 0.0) return false;
        for (int k : idx) {
            if (k == a || k == b || k == c) continue;
            const auto& P = pts[k];
            if (orient * detail::cross2(A[0], A[1], B[0], B[1], P[0], P[1]) >= 0.0 &&
                orient * detail::cross2(B[0], B[1], C[0], C[1], P[0], P[1]) >= 0.0 &&
                orient * detail::cross2(C[0], C[1], A[0], A[1], P[0], P[1]) >= 0.0)
                return false;
        }
        return true;
    };

    int guard = 0;
    while (idx.size() > 3 && guard < 2 * n * n) {
        const int m = static_cast<int>(idx.size());
        bool clipped = false;
        for (int i = 0; i < m; ++i) {
            const int a = idx[(i + m - 1) % m], b = idx[i], c = idx[(i + 1) % m];
            if (is_ear(a, b, c)) {
                tris.push_back({a, b, c});
                idx.erase(idx.begin() + i);
                clipped = true;
                break;
            }
        }
        if (!clipped) {
            // Self-intersecting or collinear leftovers: fan the rest.
            for (std::size_t i = 1; i + 1 < idx.size(); ++i) tris.push_back({idx[0], idx[i], idx[i + 1]});
            return tris;
        }
        ++guard;
    }
    if (idx.size() == 3) tris.push_back({idx[0], idx[1], idx[2]});
    return tris;
}

}  // namespace rasterdrive
