#include "fsplat/synthetic.hpp"

#include <cmath>
#include <random>

#include "fsplat/errors.hpp"
#include "fsplat/reference_renderer.hpp"
#include "fsplat/sh.hpp"

namespace fsplat {

namespace {

double uniform01(std::mt19937_64& rng) { return (rng() >> 11) * 0x1.0p-53; }

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

Camera make_camera(int size) {
    Camera cam;
    cam.width = size;
    cam.height = size;
    cam.fx = cam.fy = size * 1.25;
    cam.cx = cam.cy = size / 2.0;
    cam.near_plane = 0.1;
    cam.far_plane = 5.0;
    return cam;
}

// Degree-0 gaussian at a pixel-space offset from the image center, placed on
// the plane at depth z. Scales are given in pixels at that depth.
void add_gaussian(GaussianCloud& cloud, const Camera& cam, double px, double py, double z,
                  double scale_px, const Vec3& color, double opacity) {
    double ux = z / cam.fx;  // world units per pixel at depth z
    size_t i = cloud.size();
    cloud.resize(i + 1);
    cloud.positions[i] = Vec3(px * ux, py * (z / cam.fy), z);
    cloud.log_scales[i] = Vec3::Constant(std::log(scale_px * ux));
    cloud.opacity_logits[i] = logit(opacity);
    double* sh = cloud.sh_ptr(i);
    for (int c = 0; c < 3; ++c) sh[c] = (color[c] - 0.5) / kShC0;
}

// Backdrop plane slightly behind the scene so every pixel has coverage.
void add_backdrop(GaussianCloud& cloud, const Camera& cam, double z, std::mt19937_64& rng) {
    int half = cam.width / 2;
    for (int py = -half - 4; py <= half + 4; py += 6) {
        for (int px = -half - 4; px <= half + 4; px += 6) {
            Vec3 color(uniform(rng, 0.2, 0.5), uniform(rng, 0.2, 0.5), uniform(rng, 0.2, 0.5));
            add_gaussian(cloud, cam, px, py, z, 4.0, color, 0.97);
        }
    }
}

GaussianCloud static_texture_cloud(const Camera& cam, std::mt19937_64& rng) {
    GaussianCloud cloud;
    cloud.sh_degree = 0;
    add_backdrop(cloud, cam, 1.05, rng);
    int quarter = cam.width / 4;
    for (int py = -quarter; py < quarter; py += 2) {
        for (int px = -quarter; px < quarter; px += 2) {
            Vec3 color(uniform(rng, 0.05, 0.95), uniform(rng, 0.05, 0.95),
                       uniform(rng, 0.05, 0.95));
            add_gaussian(cloud, cam, px + 0.5, py + 0.5, 1.0, 0.9, color, 0.92);
        }
    }
    return cloud;
}

struct BlobScene {
    GaussianCloud cloud;
    std::vector<uint8_t> moving;  // per-row flag
};

BlobScene translating_blob_cloud(const Camera& cam, std::mt19937_64& rng) {
    BlobScene scene;
    scene.cloud.sh_degree = 0;
    add_backdrop(scene.cloud, cam, 1.3, rng);
    scene.moving.assign(scene.cloud.size(), 0);
    for (int k = 0; k < 60; ++k) {
        double ox, oy;
        do {
            ox = uniform(rng, -7.0, 7.0);
            oy = uniform(rng, -7.0, 7.0);
        } while (ox * ox + oy * oy > 49.0);
        Vec3 color(uniform(rng, 0.3, 1.0), uniform(rng, 0.3, 1.0), uniform(rng, 0.3, 1.0));
        add_gaussian(scene.cloud, cam, ox, oy, 1.0, 1.2, color, 0.95);
        scene.moving.push_back(1);
    }
    return scene;
}

GaussianCloud pulsating_sheet_cloud(const Camera& cam, std::mt19937_64& rng) {
    GaussianCloud cloud;
    cloud.sh_degree = 0;
    add_backdrop(cloud, cam, 1.3, rng);
    int extent = 3 * cam.width / 8;
    for (int py = -extent; py < extent; py += 2) {
        for (int px = -extent; px < extent; px += 2) {
            Vec3 color(uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9));
            add_gaussian(cloud, cam, px + 0.5, py + 0.5, 1.0, 1.1, color, 0.95);
        }
    }
    return cloud;
}

// Flow of pair (prev, cur) from the projected motion of each prev pixel's
// dominant contributor. Pixels without a contributor are invalid.
FlowField gt_flow_from_motion(const GaussianCloud& prev_cloud, const GaussianCloud& cur_cloud,
                              const Camera& cam, const std::vector<int>& dominant) {
    FlowField flow;
    flow.u = Image(cam.height, cam.width, 1);
    flow.v = Image(cam.height, cam.width, 1);
    flow.valid = Image(cam.height, cam.width, 1, 0.0);
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            int g = dominant[static_cast<size_t>(y) * cam.width + x];
            if (g < 0) continue;
            Vec3 tp = cam.to_camera(prev_cloud.positions[g]);
            Vec3 tc = cam.to_camera(cur_cloud.positions[g]);
            if (tp.z() <= cam.near_plane || tc.z() <= cam.near_plane) continue;
            Vec2 d = cam.project(tc) - cam.project(tp);
            flow.u.at(y, x, 0) = d.x();
            flow.v.at(y, x, 0) = d.y();
            flow.valid.at(y, x, 0) = 1.0;
        }
    }
    return flow;
}

}  // namespace

SyntheticScene make_synthetic_scene(const std::string& name, uint64_t seed, int frames, int size) {
    require(size >= 16, "synthetic scene size must be at least 16");
    SyntheticScene scene;
    scene.name = name;
    scene.camera = make_camera(size);
    std::mt19937_64 rng(seed);

    std::vector<uint8_t> moving;
    GaussianCloud base;
    if (name == "static_texture") {
        scene.frame_count = frames > 0 ? frames : 1;
        base = static_texture_cloud(scene.camera, rng);
        int q = size / 4;
        scene.dataset.texture_region = {q, q, 3 * q, 3 * q};
    } else if (name == "translating_blob") {
        scene.frame_count = frames > 0 ? frames : 8;
        BlobScene blob = translating_blob_cloud(scene.camera, rng);
        base = std::move(blob.cloud);
        moving = std::move(blob.moving);
    } else if (name == "pulsating_sheet") {
        scene.frame_count = frames > 0 ? frames : 8;
        base = pulsating_sheet_cloud(scene.camera, rng);
    } else {
        throw ConfigError("unknown synthetic scene '" + name +
                          "'; valid names: static_texture, translating_blob, pulsating_sheet");
    }

    const int T = scene.frame_count;
    for (int i = 0; i < T; ++i) {
        GaussianCloud cloud = base;
        if (name == "translating_blob") {
            // +2 px/frame at z = 1, starting 7 px left of center.
            double offset = (-7.0 + 2.0 * i) / scene.camera.fx;
            for (size_t g = 0; g < cloud.size(); ++g) {
                if (moving[g]) cloud.positions[g].x() += offset;
            }
        } else if (name == "pulsating_sheet") {
            double t = static_cast<double>(i) / T;
            double sigma_px = size / 4.0;
            for (size_t g = 0; g < cloud.size(); ++g) {
                if (cloud.positions[g].z() > 1.1) continue;  // backdrop stays put
                double px = cloud.positions[g].x() * scene.camera.fx / cloud.positions[g].z();
                double py = cloud.positions[g].y() * scene.camera.fy / cloud.positions[g].z();
                double bump = std::exp(-(px * px + py * py) / (2 * sigma_px * sigma_px));
                cloud.positions[g].z() -= 0.05 * std::sin(2 * M_PI * t) * bump;
            }
        }
        scene.clouds.push_back(std::move(cloud));
    }

    RenderOptions opts;
    Dataset& ds = scene.dataset;
    ds.camera = scene.camera;
    ds.has_depth = true;
    ds.has_gt_flow = T > 1;
    if (ds.has_gt_flow) ds.gt_flows.resize(T);
    std::vector<std::vector<int>> dominants(T);
    for (int i = 0; i < T; ++i) {
        ReferenceRenderResult ref = reference_render(scene.clouds[i], scene.camera, opts);
        dominants[i] = std::move(ref.dominant);
        FrameRecord rec;
        rec.image = std::move(ref.image);
        rec.depth = Image(size, size, 1, 0.0);
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                double a = ref.alpha.at(y, x, 0);
                if (a >= 0.5) rec.depth.at(y, x, 0) = ref.depth.at(y, x, 0) / a;
            }
        }
        rec.mask = Image(size, size, 1, 0.0);
        rec.time = static_cast<double>(i) / T;
        ds.frames.push_back(std::move(rec));
    }
    for (int i = 1; i < T; ++i) {
        ds.gt_flows[i] =
            gt_flow_from_motion(scene.clouds[i - 1], scene.clouds[i], scene.camera, dominants[i - 1]);
    }
    return scene;
}

}  // namespace fsplat
