#pragma once

// Depth-tested software rasterizer for SceneFrames.
//
// Every primitive is reduced to screen-space triangles (near-plane clip in
// camera space, projection, Sutherland-Hodgman against the image rectangle),
// then scan-converted with pixel-center sampling and a top-left fill rule.
// Fragments pass a strict less-than depth test and their color is faded by
// alpha = max(0, 1 - d / d_max) before the write.

#include <algorithm>
#include <bit>
#include <bitset>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rasterdrive/clipper.hpp"
#include "rasterdrive/error.hpp"
#include "rasterdrive/geometry.hpp"
#include "rasterdrive/scene.hpp"

namespace rasterdrive {

enum class FaceMode : std::uint8_t { colored, transparent };
enum class Background : std::uint8_t { black, sky_ground };

inline constexpr double kTransparentCoverage = 0.35;
inline constexpr Rgb kSkyColor{135, 206, 235};
inline constexpr Rgb kGroundColor{90, 77, 65};

struct RenderConfig {
    FaceMode face_mode = FaceMode::colored;
    bool depth_decay = true;
    Background background = Background::black;
    double d_max = 80.0;
    double line_width = 2.0;
    bool draw_wireframe = false;
    Palette palette = default_palette();
    /// Classes drawn at full intensity even when depth_decay is on.
    std::bitset<kNumClasses> decay_exempt;

    void validate() const {
        if (!(d_max > 0.0)) throw InvariantError("render config: d_max must be positive");
        if (!(line_width >= 1.0)) throw InvariantError("render config: line_width must be >= 1");
    }
};

class Framebuffer {
public:
    Framebuffer() = default;
    Framebuffer(int width, int height)
        : width_(width), height_(height),
          color_(static_cast<std::size_t>(width) * height * 3, 0),
          depth_(static_cast<std::size_t>(width) * height, std::numeric_limits<double>::infinity()) {
        if (width < 1 || height < 1) throw InvariantError("framebuffer size must be >= 1");
    }

    int width() const { return width_; }
    int height() const { return height_; }

    Rgb color(int x, int y) const {
        const std::size_t i = index(x, y) * 3;
        return {color_[i], color_[i + 1], color_[i + 2]};
    }
    double depth(int x, int y) const { return depth_[index(x, y)]; }

    void write(int x, int y, Rgb c, double d) {
        const std::size_t i = index(x, y);
        depth_[i] = d;
        color_[3 * i] = c.r;
        color_[3 * i + 1] = c.g;
        color_[3 * i + 2] = c.b;
    }

    std::span<const std::uint8_t> color_bytes() const { return color_; }
    std::span<const double> depth_values() const { return depth_; }
    std::span<std::uint8_t> color_bytes() { return color_; }
    std::span<double> depth_values() { return depth_; }

    friend bool operator==(const Framebuffer&, const Framebuffer&) = default;

private:
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> color_;
    std::vector<double> depth_;
};

/// What produced a fragment; only cuboid faces are affected by
/// FaceMode::transparent.
enum class FragmentKind : std::uint8_t { solid, face, edge };

struct Fragment {
    int u = 0;
    int v = 0;
    double depth = 0.0;
    Rgb base;
    FragmentKind kind = FragmentKind::solid;
    bool decay = true;
};

inline double fade_weight(double depth, double d_max) { return std::max(0.0, 1.0 - depth / d_max); }

inline Rgb shade(const Fragment& f, const RenderConfig& cfg) {
    const double alpha = (cfg.depth_decay && f.decay) ? fade_weight(f.depth, cfg.d_max) : 1.0;
    const bool thin = cfg.face_mode == FaceMode::transparent && f.kind == FragmentKind::face;
    auto channel = [&](std::uint8_t c) {
        double x = static_cast<double>(c) * alpha;
        if (thin) x *= kTransparentCoverage;
        // Round half away from zero; t - i is exact for t in [0, 255].
        const double t = std::clamp(x, 0.0, 255.0);
        const int i = static_cast<int>(t);
        return static_cast<std::uint8_t>(i + (t - i >= 0.5 ? 1 : 0));
    };
    return {channel(f.base.r), channel(f.base.g), channel(f.base.b)};
}

/// A screen-space triangle ready for scan conversion.
struct ScreenTriangle {
    std::array<ClipVertex, 3> v;
    Rgb color;
    FragmentKind kind = FragmentKind::solid;
    bool decay = true;
};

namespace detail {

// Edge function of P against the directed edge a->b.
inline double edge_fn(const ClipVertex& a, const ClipVertex& b, double px, double py) {
    return (b.u - a.u) * (py - a.v) - (b.v - a.v) * (px - a.u);
}

// Top-left rule for a positively oriented triangle: pixel centers exactly on
// an edge belong to it only for top (horizontal, going right) or left
// (going up) edges. An edge and its reverse never both own a center.
inline bool owns_boundary(const ClipVertex& a, const ClipVertex& b) {
    const double dy = b.v - a.v;
    return dy < 0.0 || (dy == 0.0 && b.u - a.u > 0.0);
}

struct TriangleSetup {
    ClipVertex a, b, c;
    double area2 = 0.0;
    bool own_bc = false, own_ca = false, own_ab = false;

    bool covers(double px, double py, double& w0, double& w1, double& w2) const {
        w0 = edge_fn(b, c, px, py);
        w1 = edge_fn(c, a, px, py);
        w2 = edge_fn(a, b, px, py);
        return (w0 > 0.0 || (w0 == 0.0 && own_bc)) && (w1 > 0.0 || (w1 == 0.0 && own_ca)) &&
               (w2 > 0.0 || (w2 == 0.0 && own_ab));
    }
};

inline bool setup_triangle(const std::array<ClipVertex, 3>& v, TriangleSetup& s) {
    s.a = v[0];
    s.b = v[1];
    s.c = v[2];
    s.area2 = edge_fn(s.a, s.b, s.c.u, s.c.v);
    if (!(s.area2 != 0.0) || !std::isfinite(s.area2)) return false;
    if (s.area2 < 0.0) {
        std::swap(s.b, s.c);
        s.area2 = -s.area2;
    }
    s.own_bc = owns_boundary(s.b, s.c);
    s.own_ca = owns_boundary(s.c, s.a);
    s.own_ab = owns_boundary(s.a, s.b);
    return true;
}

/// Calls visit(x, y, depth) for every pixel center covered by `tri` under the
/// top-left rule, with depth interpolated linearly in screen space.
template <class Visit>
void scan_triangle(const std::array<ClipVertex, 3>& tri, int width, int height, Visit&& visit) {
    TriangleSetup s;
    if (!setup_triangle(tri, s)) return;

    const double min_u = std::min({s.a.u, s.b.u, s.c.u});
    const double max_u = std::max({s.a.u, s.b.u, s.c.u});
    const double min_v = std::min({s.a.v, s.b.v, s.c.v});
    const double max_v = std::max({s.a.v, s.b.v, s.c.v});
    const int x_lo = std::max(0, static_cast<int>(std::floor(min_u - 0.5)));
    const int x_hi = std::min(width - 1, static_cast<int>(std::ceil(max_u - 0.5)));
    const int y_lo = std::max(0, static_cast<int>(std::floor(min_v - 0.5)));
    const int y_hi = std::min(height - 1, static_cast<int>(std::ceil(max_v - 0.5)));
    if (x_lo > x_hi || y_lo > y_hi) return;

    const double inv_area = 1.0 / s.area2;
    const ClipVertex* edges[3][2] = {{&s.b, &s.c}, {&s.c, &s.a}, {&s.a, &s.b}};

    double w0, w1, w2;
    for (int y = y_lo; y <= y_hi; ++y) {
        const double py = y + 0.5;
        // Analytic span of u where every edge function is >= 0.
        double lo = x_lo + 0.5, hi = x_hi + 0.5;
        bool empty = false;
        for (const auto& e : edges) {
            const ClipVertex& p = *e[0];
            const ClipVertex& q = *e[1];
            // w(u) = slope * u + offset
            const double slope = -(q.v - p.v);
            const double offset = (q.u - p.u) * (py - p.v) + (q.v - p.v) * p.u;
            if (slope > 0.0)
                lo = std::max(lo, -offset / slope);
            else if (slope < 0.0)
                hi = std::min(hi, -offset / slope);
            else if (offset < 0.0)
                empty = true;
        }
        if (empty || !(lo <= hi + 2.0)) continue;
        int xs = std::clamp(static_cast<int>(std::floor(lo - 0.5)) - 1, x_lo, x_hi);
        int xe = std::clamp(static_cast<int>(std::ceil(hi - 0.5)) + 1, x_lo, x_hi);
        // Pin the ends with the exact coverage test; coverage along a row is
        // contiguous because each edge test is monotone in u.
        while (xs <= xe && !s.covers(xs + 0.5, py, w0, w1, w2)) ++xs;
        if (xs > xe) continue;
        while (xs > x_lo && s.covers(xs - 0.5, py, w0, w1, w2)) --xs;
        while (xe >= xs && !s.covers(xe + 0.5, py, w0, w1, w2)) --xe;
        while (xe < x_hi && s.covers(xe + 1.5, py, w0, w1, w2)) ++xe;

        // Row-constant halves of edge_fn; the per-pixel result is bit-identical.
        const double r0 = (s.c.u - s.b.u) * (py - s.b.v), k0 = s.c.v - s.b.v;
        const double r1 = (s.a.u - s.c.u) * (py - s.c.v), k1 = s.a.v - s.c.v;
        const double r2 = (s.b.u - s.a.u) * (py - s.a.v), k2 = s.b.v - s.a.v;
        for (int x = xs; x <= xe; ++x) {
            const double px = x + 0.5;
            w0 = r0 - k0 * (px - s.b.u);
            w1 = r1 - k1 * (px - s.c.u);
            w2 = r2 - k2 * (px - s.a.u);
            visit(x, y, (w0 * s.a.depth + w1 * s.b.depth + w2 * s.c.depth) * inv_area);
        }
    }
}

}  // namespace detail

/// Scan-converts one triangle into `fb`. Covered pixel centers whose
/// interpolated depth beats the stored depth receive shade(fragment).
inline void fill_triangle(Framebuffer& fb, const std::array<ClipVertex, 3>& tri, Rgb color,
                          const RenderConfig& cfg, FragmentKind kind = FragmentKind::solid,
                          bool decay = true) {
    Fragment frag;
    frag.base = color;
    frag.kind = kind;
    frag.decay = decay;
    detail::scan_triangle(tri, fb.width(), fb.height(), [&](int x, int y, double d) {
        if (d < fb.depth(x, y)) {
            frag.u = x;
            frag.v = y;
            frag.depth = std::max(d, 0.0);
            fb.write(x, y, shade(frag, cfg), frag.depth);
        }
    });
}

/// Screen-space quad of width `width` around the segment a-b, clipped to
/// `rect` and fanned into triangles. Empty for zero-length segments.
inline std::vector<std::array<ClipVertex, 3>> stroke_segment(const ClipVertex& a, const ClipVertex& b,
                                                             double width, const ClipRect& rect) {
    const double du = b.u - a.u;
    const double dv = b.v - a.v;
    const double len = std::hypot(du, dv);
    if (!(len > 0.0)) return {};
    const double nu = -dv / len * width * 0.5;
    const double nv = du / len * width * 0.5;
    Polygon2D quad{{{a.u + nu, a.v + nv, a.depth},
                    {b.u + nu, b.v + nv, b.depth},
                    {b.u - nu, b.v - nv, b.depth},
                    {a.u - nu, a.v - nv, a.depth}}};
    Polygon2D clipped = clip_polygon(quad, rect);
    std::vector<std::array<ClipVertex, 3>> tris;
    for (std::size_t i = 1; i + 1 < clipped.size(); ++i)
        tris.push_back({clipped.vertices[0], clipped.vertices[i], clipped.vertices[i + 1]});
    return tris;
}

inline ClipRect image_rect(int width, int height) {
    return {0.0, static_cast<double>(width), 0.0, static_cast<double>(height)};
}

/// Strokes consecutive screen-space vertices as quads of cfg.line_width.
inline void draw_polyline(Framebuffer& fb, std::span<const ClipVertex> pts, Rgb color,
                          const RenderConfig& cfg, FragmentKind kind = FragmentKind::solid,
                          bool decay = true) {
    const ClipRect rect = image_rect(fb.width(), fb.height());
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
        for (const auto& tri : stroke_segment(pts[i], pts[i + 1], cfg.line_width, rect))
            fill_triangle(fb, tri, color, cfg, kind, decay);
}

/// Image row of the horizon: the projection of the camera-forward direction
/// flattened onto the world ground plane. +inf when the camera looks straight
/// up (all sky), -inf when straight down.
inline double horizon_row(const CameraRig& rig) {
    const Mat3& r = rig.world_to_camera.rotation;
    const Vec3 forward = r.transpose() * Vec3::UnitZ();
    const Vec3 flat(forward.x(), forward.y(), 0.0);
    const double n = flat.norm();
    if (n < 1e-12) return forward.z() > 0.0 ? std::numeric_limits<double>::infinity()
                                            : -std::numeric_limits<double>::infinity();
    const Vec3 dc = r * (flat / n);
    if (dc.z() <= 0.0) return forward.z() > 0.0 ? std::numeric_limits<double>::infinity()
                                                : -std::numeric_limits<double>::infinity();
    return rig.intrinsics.fy * dc.y() / dc.z() + rig.intrinsics.cy;
}

/// Clears color to the configured background and depth to +inf.
inline void composite_background(Framebuffer& fb, const RenderConfig& cfg, const CameraRig& rig) {
    auto depth = fb.depth_values();
    std::fill(depth.begin(), depth.end(), std::numeric_limits<double>::infinity());
    auto color = fb.color_bytes();
    if (cfg.background == Background::black) {
        std::fill(color.begin(), color.end(), std::uint8_t{0});
        return;
    }
    const double horizon = horizon_row(rig);
    const std::size_t w = static_cast<std::size_t>(fb.width());
    for (int y = 0; y < fb.height(); ++y) {
        const Rgb c = (y + 0.5 < horizon) ? kSkyColor : kGroundColor;
        std::uint8_t* row = color.data() + static_cast<std::size_t>(y) * w * 3;
        for (std::size_t x = 0; x < w; ++x) {
            row[3 * x] = c.r;
            row[3 * x + 1] = c.g;
            row[3 * x + 2] = c.b;
        }
    }
}

namespace detail {

// Relative depth pulled toward the camera so strokes win exact ties with the
// surfaces they lie on.
inline constexpr double kStrokeDepthBias = 1e-4;

// Largest far/near depth ratio of one emitted piece; screen-space depth
// interpolation is then within about 1.2% of the perspective depth.
inline constexpr double kMaxSliceDepthRatio = 1.25;

class DrawListBuilder {
public:
    DrawListBuilder(const CameraRig& rig, const RenderConfig& cfg, std::vector<ScreenTriangle>& out)
        : rig_(rig), cfg_(cfg), out_(out), rect_(image_rect(rig.width, rig.height)) {}

    // World-space triangle, filled.
    void triangle(const Vec3& p0, const Vec3& p1, const Vec3& p2, Rgb color, FragmentKind kind,
                  bool decay) {
        const auto& T = rig_.world_to_camera;
        std::vector<Vec3> cam = {T.apply(p0), T.apply(p1), T.apply(p2)};
        if (cam[0].z() < rig_.z_near || cam[1].z() < rig_.z_near || cam[2].z() < rig_.z_near) {
            cam = clip_polygon_near(cam, rig_.z_near);
            if (cam.empty()) return;
        }
        for (const auto& piece : slice_polygon_depth(cam, rig_.z_near, kMaxSliceDepthRatio))
            emit_projected(piece, color, kind, decay);
    }

    // World-space segment, stroked.
    void segment(const Vec3& p0, const Vec3& p1, Rgb color, FragmentKind kind, bool decay) {
        const auto& T = rig_.world_to_camera;
        auto seg = clip_segment_near(T.apply(p0), T.apply(p1), rig_.z_near);
        if (!seg) return;
        const auto pts = slice_segment_depth(seg->first, seg->second, rig_.z_near, kMaxSliceDepthRatio);
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            ClipVertex a = to_clip(project_camera_point(pts[i], rig_.intrinsics));
            ClipVertex b = to_clip(project_camera_point(pts[i + 1], rig_.intrinsics));
            a.depth *= 1.0 - kStrokeDepthBias;
            b.depth *= 1.0 - kStrokeDepthBias;
            for (const auto& tri : stroke_segment(a, b, cfg_.line_width, rect_))
                out_.push_back({tri, color, kind, decay});
        }
    }

private:
    static ClipVertex to_clip(const ProjectedPoint& p) { return {p.u, p.v, p.depth}; }

    void emit_projected(const std::vector<Vec3>& cam, Rgb color, FragmentKind kind, bool decay) {
        Polygon2D poly;
        poly.vertices.reserve(cam.size());
        for (const auto& pc : cam) poly.vertices.push_back(to_clip(project_camera_point(pc, rig_.intrinsics)));
        bool inside = true;
        for (const auto& v : poly.vertices) inside = inside && rect_.contains(v);
        if (!inside) poly = clip_polygon(poly, rect_);
        for (std::size_t i = 1; i + 1 < poly.size(); ++i)
            out_.push_back({{poly.vertices[0], poly.vertices[i], poly.vertices[i + 1]}, color, kind, decay});
    }

    const CameraRig& rig_;
    const RenderConfig& cfg_;
    std::vector<ScreenTriangle>& out_;
    ClipRect rect_;
};

inline bool decays(const RenderConfig& cfg, SemanticClass c) {
    return !cfg.decay_exempt.test(static_cast<std::size_t>(c));
}

inline void add_cuboid(DrawListBuilder& b, const Cuboid& box, const RenderConfig& cfg) {
    const Rgb color = cfg.palette[box.cls];
    const bool decay = decays(cfg, box.cls);
    const auto c = corners(box);
    for (const auto& f : kFaceCorners) {
        // Quads split along the (0, 2) diagonal.
        b.triangle(c[f[0]], c[f[1]], c[f[2]], color, FragmentKind::face, decay);
        b.triangle(c[f[0]], c[f[2]], c[f[3]], color, FragmentKind::face, decay);
    }
    if (cfg.face_mode == FaceMode::transparent || cfg.draw_wireframe)
        for (const auto& e : kBoxEdges) b.segment(c[e[0]], c[e[1]], color, FragmentKind::edge, decay);
}

}  // namespace detail

/// Triangulation of a closed map polyline in the ground plane (x, y).
inline std::vector<std::array<int, 3>> triangulate_polyline(const Polyline& line) {
    std::vector<std::array<double, 2>> pts;
    pts.reserve(line.vertices.size());
    for (const auto& v : line.vertices) pts.push_back({v.x(), v.y()});
    return triangulate(pts);
}

/// All screen-space triangles for one camera, in submission order:
/// map, actors, traffic lights.
inline std::vector<ScreenTriangle> build_draw_list(const SceneFrame& frame, const CameraRig& rig,
                                                   const RenderConfig& cfg) {
    std::vector<ScreenTriangle> out;
    detail::DrawListBuilder b(rig, cfg, out);
    for (const auto& line : frame.map) {
        const Rgb color = cfg.palette[line.cls];
        const bool decay = detail::decays(cfg, line.cls);
        if (line.closed) {
            for (const auto& t : triangulate_polyline(line))
                b.triangle(line.vertices[t[0]], line.vertices[t[1]], line.vertices[t[2]], color,
                           FragmentKind::solid, decay);
        } else {
            for (std::size_t i = 0; i + 1 < line.vertices.size(); ++i)
                b.segment(line.vertices[i], line.vertices[i + 1], color, FragmentKind::solid, decay);
        }
    }
    for (const auto& actor : frame.actors) detail::add_cuboid(b, actor, cfg);
    for (const auto& light : frame.lights) detail::add_cuboid(b, light_as_cuboid(light), cfg);
    return out;
}

/// Fills each triangle in order with the shared depth test.
inline void rasterize(Framebuffer& fb, std::span<const ScreenTriangle> tris, const RenderConfig& cfg) {
    for (const ScreenTriangle& t : tris) fill_triangle(fb, t.v, t.color, cfg, t.kind, t.decay);
}

inline Framebuffer render_frame(const SceneFrame& frame, std::size_t rig_index, const RenderConfig& cfg) {
    if (rig_index >= frame.rigs.size())
        throw RangeError("render_frame: rig index " + std::to_string(rig_index) + " out of range (" +
                         std::to_string(frame.rigs.size()) + " rigs)");
    const CameraRig& rig = frame.rigs[rig_index];
    Framebuffer fb(rig.width, rig.height);
    composite_background(fb, cfg, rig);
    const auto tris = build_draw_list(frame, rig, cfg);
    rasterize(fb, tris, cfg);
    return fb;
}

/// Binary PPM (P6, maxval 255).
inline std::string encode_ppm(const Framebuffer& fb) {
    std::string header = "P6\n" + std::to_string(fb.width()) + " " + std::to_string(fb.height()) + "\n255\n";
    const auto bytes = fb.color_bytes();
    std::string out;
    out.reserve(header.size() + bytes.size());
    out += header;
    out.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    return out;
}

/// Raw depth grid: uint32 width, uint32 height, then width*height float32,
/// all little-endian, row-major.
inline std::string encode_depth(const Framebuffer& fb) {
    std::string out;
    out.reserve(8 + fb.depth_values().size() * 4);
    auto put_u32 = [&](std::uint32_t x) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xFFu));
    };
    put_u32(static_cast<std::uint32_t>(fb.width()));
    put_u32(static_cast<std::uint32_t>(fb.height()));
    for (double d : fb.depth_values()) put_u32(std::bit_cast<std::uint32_t>(static_cast<float>(d)));
    return out;
}

}  // namespace rasterdrive
