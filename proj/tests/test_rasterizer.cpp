#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "oracles.hpp"
#include "rasterdrive/rasterizer.hpp"

using namespace rasterdrive;

namespace {

RenderConfig no_decay() {
    RenderConfig c;
    c.depth_decay = false;
    return c;
}

std::set<std::pair<int, int>> written(const Framebuffer& fb) {
    std::set<std::pair<int, int>> s;
    for (int y = 0; y < fb.height(); ++y)
        for (int x = 0; x < fb.width(); ++x)
            if (std::isfinite(fb.depth(x, y))) s.insert({x, y});
    return s;
}

CameraRig forward_rig(int w, int h) {
    CameraRig rig;
    rig.width = w;
    rig.height = h;
    rig.intrinsics = {w * 0.5, w * 0.5, w * 0.5, h * 0.5};
    rig.world_to_camera = mounted_extrinsics(SE3Pose::identity(), camera_mount(Vec3(0, 0, 1.5)));
    return rig;
}

}  // namespace

TEST(Shade, AlphaFormula) {
    RenderConfig cfg;
    Fragment f{0, 0, 0.0, {200, 100, 50}};
    EXPECT_EQ(shade(f, cfg), (Rgb{200, 100, 50}));
    f.depth = cfg.d_max / 2;
    EXPECT_EQ(shade(f, cfg), (Rgb{100, 50, 25}));
    f.depth = cfg.d_max;
    EXPECT_EQ(shade(f, cfg), (Rgb{0, 0, 0}));
    f.depth = 3 * cfg.d_max;
    EXPECT_EQ(shade(f, cfg), (Rgb{0, 0, 0}));
    cfg.depth_decay = false;
    EXPECT_EQ(shade(f, cfg), (Rgb{200, 100, 50}));
}

TEST(Shade, TransparentFacesOnly) {
    RenderConfig cfg = no_decay();
    cfg.face_mode = FaceMode::transparent;
    Fragment face{0, 0, 1.0, {200, 100, 40}, FragmentKind::face};
    Fragment edge{0, 0, 1.0, {200, 100, 40}, FragmentKind::edge};
    EXPECT_EQ(shade(face, cfg), (Rgb{70, 35, 14}));
    EXPECT_EQ(shade(edge, cfg), (Rgb{200, 100, 40}));
}

TEST(Shade, PerClassDecayOverride) {
    RenderConfig cfg;
    Fragment f{0, 0, 40.0, {200, 100, 50}, FragmentKind::solid, false};
    EXPECT_EQ(shade(f, cfg), (Rgb{200, 100, 50}));
}

TEST(FillTriangle, RightTriangleMatchesBruteForce) {
    Framebuffer fb(16, 16);
    const std::array<ClipVertex, 3> tri{{{0, 0, 1}, {10, 0, 1}, {0, 10, 1}}};
    fill_triangle(fb, tri, {255, 0, 0}, no_decay());
    std::set<std::pair<int, int>> expect;
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            if (oracle::covers(tri, x + 0.5, y + 0.5)) expect.insert({x, y});
    EXPECT_EQ(written(fb), expect);
    EXPECT_EQ(expect.size(), 45u);  // hypotenuse centers belong to a bottom-right edge
}

TEST(FillTriangle, RandomTrianglesMatchBruteForce) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> c(-10, 74), d(0.5, 50);
    std::uniform_int_distribution<int> grid(-4, 68);
    for (int i = 0; i < 1000; ++i) {
        Framebuffer fb(64, 48);
        std::array<ClipVertex, 3> tri;
        for (auto& v : tri) {
            // Mix of arbitrary and pixel-center-aligned vertices to exercise ties.
            if (i % 3 == 0)
                v = {grid(rng) + 0.5, grid(rng) + 0.5, d(rng)};
            else
                v = {c(rng), c(rng), d(rng)};
        }
        fill_triangle(fb, tri, {1, 2, 3}, no_decay());
        std::set<std::pair<int, int>> expect;
        for (int y = 0; y < 48; ++y)
            for (int x = 0; x < 64; ++x)
                if (oracle::covers(tri, x + 0.5, y + 0.5)) expect.insert({x, y});
        ASSERT_EQ(written(fb), expect) << "triangle " << i;
    }
}

TEST(FillTriangle, SharedEdgeWrittenOnce) {
    // Two triangles of a square: every center covered exactly once.
    const std::array<ClipVertex, 3> a{{{2, 2, 1}, {12, 2, 1}, {12, 12, 1}}};
    const std::array<ClipVertex, 3> b{{{2, 2, 1}, {12, 12, 1}, {2, 12, 1}}};
    int both = 0, any = 0;
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            const bool ca = oracle::covers(a, x + 0.5, y + 0.5), cb = oracle::covers(b, x + 0.5, y + 0.5);
            both += ca && cb;
            any += ca || cb;
        }
    EXPECT_EQ(both, 0);
    EXPECT_EQ(any, 100);
}

TEST(FillTriangle, DepthTestAndDegenerate) {
    Framebuffer fb(8, 8);
    const std::array<ClipVertex, 3> far{{{0, 0, 5}, {8, 0, 5}, {0, 8, 5}}};
    const std::array<ClipVertex, 3> near{{{0, 0, 2}, {8, 0, 2}, {0, 8, 2}}};
    fill_triangle(fb, far, {0, 0, 255}, no_decay());
    fill_triangle(fb, near, {255, 0, 0}, no_decay());
    fill_triangle(fb, far, {0, 255, 0}, no_decay());
    EXPECT_EQ(fb.color(1, 1), (Rgb{255, 0, 0}));
    EXPECT_EQ(fb.depth(1, 1), 2.0);

    Framebuffer empty(8, 8);
    fill_triangle(empty, {{{0, 0, 1}, {4, 4, 1}, {8, 8, 1}}}, {255, 255, 255}, no_decay());
    EXPECT_TRUE(written(empty).empty());
}

TEST(DrawPolyline, HorizontalStroke) {
    Framebuffer fb(32, 16);
    const std::vector<ClipVertex> pts{{5, 8, 1}, {15, 8, 1}};
    draw_polyline(fb, pts, {255, 255, 0}, no_decay());
    const auto px = written(fb);
    EXPECT_EQ(px.size(), 20u);
    for (const auto& [x, y] : px) {
        // Distance from the pixel center to the segment stays within width / 2.
        const double cx = x + 0.5, cy = y + 0.5;
        EXPECT_GE(cx, 5.0);
        EXPECT_LE(cx, 15.0);
        EXPECT_LE(std::abs(cy - 8.0), 1.0);
    }
}

TEST(DrawPolyline, HiddenBehindNearerSurface) {
    Framebuffer fb(32, 16);
    fill_triangle(fb, {{{0, 0, 1}, {64, 0, 1}, {0, 64, 1}}}, {9, 9, 9}, no_decay());
    const Framebuffer before = fb;
    const std::vector<ClipVertex> pts{{5, 8, 3}, {15, 8, 3}};
    draw_polyline(fb, pts, {255, 255, 0}, no_decay());
    EXPECT_EQ(fb, before);
}

TEST(RenderFrame, EmptySceneIsBlackAndInfinite) {
    SceneFrame f;
    f.rigs.push_back(forward_rig(32, 16));
    const Framebuffer fb = render_frame(f, 0, RenderConfig{});
    for (auto b : fb.color_bytes()) EXPECT_EQ(b, 0);
    for (auto d : fb.depth_values()) EXPECT_TRUE(std::isinf(d));
    EXPECT_THROW(render_frame(f, 1, RenderConfig{}), RangeError);
}

TEST(RenderFrame, NearerCuboidOccludes) {
    SceneFrame f;
    f.rigs.push_back(forward_rig(64, 36));
    const Cuboid near{2, 2, 3, SE3Pose::from_translation(Vec3(10, 0, 0)), SemanticClass::vehicle};
    const Cuboid far{2, 2, 3, SE3Pose::from_translation(Vec3(20, 0, 0)), SemanticClass::pedestrian};
    f.actors = {far, near};
    const RenderConfig cfg = no_decay();
    const Framebuffer fb = render_frame(f, 0, cfg);
    EXPECT_EQ(fb.color(32, 18), cfg.palette[SemanticClass::vehicle]);
    EXPECT_NEAR(fb.depth(32, 18), 9.0, 0.05);
    f.actors = {near, far};
    EXPECT_EQ(render_frame(f, 0, cfg), fb);
}

TEST(RenderFrame, PermutationInvarianceAndReferenceDepth) {
    std::mt19937_64 rng(21);
    for (int i = 0; i < 5; ++i) {
        SceneFrame f = oracle::random_scene(rng, 128, 72);
        const RenderConfig cfg;
        const Framebuffer fb = render_frame(f, 0, cfg);
        std::shuffle(f.actors.begin(), f.actors.end(), rng);
        EXPECT_EQ(render_frame(f, 0, cfg), fb);
        const Framebuffer ref = oracle::reference_render(f, 0, cfg);
        EXPECT_TRUE(std::equal(ref.depth_values().begin(), ref.depth_values().end(), fb.depth_values().begin()));
        EXPECT_EQ(ref, render_frame(f, 0, cfg));
    }
}

TEST(RenderFrame, TransparentModeDrawsOpaqueEdges) {
    SceneFrame f;
    f.rigs.push_back(forward_rig(128, 72));
    f.actors = {Cuboid{4, 2, 1.5, SE3Pose::from_yaw(0.4, Vec3(8, 0, 0)), SemanticClass::vehicle}};
    RenderConfig cfg = no_decay();
    cfg.face_mode = FaceMode::transparent;
    const Framebuffer fb = render_frame(f, 0, cfg);
    const Rgb full = cfg.palette[SemanticClass::vehicle];
    const Rgb thin = shade(Fragment{0, 0, 1.0, full, FragmentKind::face}, cfg);
    std::size_t n_full = 0, n_thin = 0;
    for (int y = 0; y < 72; ++y)
        for (int x = 0; x < 128; ++x) {
            n_full += fb.color(x, y) == full;
            n_thin += fb.color(x, y) == thin;
        }
    EXPECT_GT(n_full, 50u);
    EXPECT_GT(n_thin, 200u);
}

TEST(Background, SkyGroundHorizon) {
    RenderConfig cfg;
    cfg.background = Background::sky_ground;
    CameraRig rig = forward_rig(64, 36);
    EXPECT_NEAR(horizon_row(rig), 18.0, 1e-9);
    Framebuffer fb(64, 36);
    composite_background(fb, cfg, rig);
    EXPECT_EQ(fb.color(3, 17), kSkyColor);
    EXPECT_EQ(fb.color(3, 18), kGroundColor);
    rig.world_to_camera = mounted_extrinsics(SE3Pose::identity(), camera_mount(Vec3(0, 0, 1.5), 0.0, 0.2));
    EXPECT_GT(horizon_row(rig), 18.0);
    EXPECT_NEAR(horizon_row(rig), 18.0 + 32.0 * std::tan(0.2), 1e-9);
}

TEST(Encode, PpmAndDepth) {
    Framebuffer fb(3, 2);
    fb.write(1, 0, {1, 2, 3}, 4.5);
    const std::string ppm = encode_ppm(fb);
    EXPECT_EQ(ppm.substr(0, 11), "P6\n3 2\n255\n");
    EXPECT_EQ(ppm.size(), 11u + 18u);
    EXPECT_EQ(static_cast<unsigned char>(ppm[11 + 3]), 1);
    const std::string depth = encode_depth(fb);
    ASSERT_EQ(depth.size(), 8u + 24u);
    EXPECT_EQ(depth[0], 3);
    EXPECT_EQ(depth[4], 2);
    float v;
    std::memcpy(&v, depth.data() + 8 + 4, 4);
    EXPECT_EQ(v, 4.5f);
}

TEST(RenderConfig, Validation) {
    RenderConfig c;
    c.d_max = 0;
    EXPECT_THROW(c.validate(), InvariantError);
    c = RenderConfig{};
    c.line_width = 0.5;
    EXPECT_THROW(c.validate(), InvariantError);
}
