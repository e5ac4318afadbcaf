#include "fsplat/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "fsplat/errors.hpp"
#include "fsplat/flow_io.hpp"
#include "fsplat/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace fsplat {

namespace {

std::string frame_name(int index, const char* ext) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d%s", index, ext);
    return buf;
}

// Numeric indices of "<digits>.png" files, ascending.
std::vector<int> list_frame_indices(const fs::path& dir) {
    std::vector<int> indices;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
        std::string stem = entry.path().stem().string();
        if (stem.empty() || !std::all_of(stem.begin(), stem.end(), [](char c) {
                return c >= '0' && c <= '9';
            })) {
            continue;
        }
        indices.push_back(std::stoi(stem));
    }
    std::sort(indices.begin(), indices.end());
    return indices;
}

json parse_json_file(const fs::path& path, const char* what) {
    std::ifstream is(path);
    if (!is) throw DataError(std::string("missing ") + what + ": " + path.string());
    json j = json::parse(is, nullptr, false);
    if (j.is_discarded()) throw DataError(std::string("malformed json in ") + path.string());
    return j;
}

double want_number(const json& j, const char* key, const fs::path& path) {
    if (!j.contains(key) || !j[key].is_number()) {
        throw DataError("camera metadata missing numeric field '" + std::string(key) + "' in " +
                        path.string());
    }
    return j[key].get<double>();
}

}  // namespace

Dataset load_dataset(const std::string& root) {
    fs::path base(root);
    if (!fs::is_directory(base)) throw DataError("dataset directory not found: " + root);

    fs::path cam_path = base / "camera.json";
    json meta = parse_json_file(cam_path, "camera metadata");
    static const std::vector<std::string> known = {
        "fx", "fy", "cx", "cy", "width", "height", "near", "far",
        "world_to_camera", "depth_scale", "texture_region"};
    for (const auto& item : meta.items()) {
        if (std::find(known.begin(), known.end(), item.key()) == known.end()) {
            throw DataError("unknown camera metadata field '" + item.key() + "' in " +
                            cam_path.string());
        }
    }

    Dataset ds;
    ds.camera.fx = want_number(meta, "fx", cam_path);
    ds.camera.fy = want_number(meta, "fy", cam_path);
    ds.camera.cx = want_number(meta, "cx", cam_path);
    ds.camera.cy = want_number(meta, "cy", cam_path);
    ds.camera.width = static_cast<int>(want_number(meta, "width", cam_path));
    ds.camera.height = static_cast<int>(want_number(meta, "height", cam_path));
    ds.camera.near_plane = want_number(meta, "near", cam_path);
    ds.camera.far_plane = want_number(meta, "far", cam_path);
    if (!meta.contains("world_to_camera") || !meta["world_to_camera"].is_array() ||
        meta["world_to_camera"].size() != 16) {
        throw DataError("camera metadata needs world_to_camera as 16 row-major numbers in " +
                        cam_path.string());
    }
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            ds.camera.world_to_camera(r, c) = meta["world_to_camera"][r * 4 + c].get<double>();
        }
    }
    if (meta.contains("depth_scale")) ds.depth_scale = want_number(meta, "depth_scale", cam_path);
    if (meta.contains("texture_region")) {
        const json& tr = meta["texture_region"];
        if (!tr.is_array() || tr.size() != 4) {
            throw DataError("texture_region must be [x0, y0, x1, y1] in " + cam_path.string());
        }
        ds.texture_region = {tr[0].get<int>(), tr[1].get<int>(), tr[2].get<int>(),
                             tr[3].get<int>()};
    }

    fs::path images_dir = base / "images";
    if (!fs::is_directory(images_dir)) throw DataError("dataset has no images/ directory: " + root);
    std::vector<int> indices = list_frame_indices(images_dir);
    if (indices.empty()) throw DataError("no frames found under " + images_dir.string());

    fs::path depth_dir = base / "depth";
    fs::path mask_dir = base / "masks";
    ds.has_depth = fs::is_directory(depth_dir);
    bool has_masks = fs::is_directory(mask_dir);
    if (!ds.has_depth) {
        std::cerr << "warning: " << root << " has no depth/; depth supervision disabled\n";
    }

    const int T = static_cast<int>(indices.size());
    for (int i = 0; i < T; ++i) {
        FrameRecord rec;
        fs::path img_path = images_dir / frame_name(indices[i], ".png");
        rec.image = read_png_rgb(img_path.string());
        if (rec.image.height() != ds.camera.height || rec.image.width() != ds.camera.width) {
            throw DataError("frame dimensions disagree with camera metadata: " +
                            img_path.string());
        }
        if (ds.has_depth) {
            fs::path d = depth_dir / frame_name(indices[i], ".png");
            rec.depth = read_png_gray16(d.string(), ds.depth_scale);
            if (rec.depth.height() != rec.image.height() || rec.depth.width() != rec.image.width()) {
                throw DataError("depth dimensions disagree with image: " + d.string());
            }
        }
        fs::path m = mask_dir / frame_name(indices[i], ".png");
        if (has_masks && fs::exists(m)) {
            rec.mask = read_png_mask(m.string());
            if (rec.mask.height() != rec.image.height() || rec.mask.width() != rec.image.width()) {
                throw DataError("mask dimensions disagree with image: " + m.string());
            }
        } else {
            rec.mask = Image(rec.image.height(), rec.image.width(), 1, 0.0);
        }
        rec.time = static_cast<double>(i) / T;
        ds.frames.push_back(std::move(rec));
    }

    fs::path flow_dir = base / "flow";
    if (fs::is_directory(flow_dir)) {
        ds.gt_flows.resize(T);
        ds.has_gt_flow = true;
        for (int i = 1; i < T; ++i) {
            fs::path f = flow_dir / frame_name(indices[i], ".flo");
            if (!fs::exists(f)) throw DataError("missing flow file: " + f.string());
            ds.gt_flows[i] = read_flo(f.string());
            if (ds.gt_flows[i].u.height() != ds.camera.height ||
                ds.gt_flows[i].u.width() != ds.camera.width) {
                throw DataError("flow dimensions disagree with camera metadata: " + f.string());
            }
            fs::path v = flow_dir / frame_name(indices[i], "_valid.png");
            if (fs::exists(v)) {
                Image valid = read_png_mask(v.string());
                // Sidecar stores validity directly (1 = valid).
                ds.gt_flows[i].valid = std::move(valid);
            }
        }
    }
    return ds;
}

void save_dataset(const std::string& root, const Dataset& dataset) {
    fs::path base(root);
    fs::create_directories(base / "images");
    if (dataset.has_depth) fs::create_directories(base / "depth");
    bool any_mask = false;
    for (const FrameRecord& f : dataset.frames) {
        for (size_t i = 0; i < f.mask.size(); ++i) {
            if (f.mask.raw()[i] != 0.0) {
                any_mask = true;
                break;
            }
        }
        if (any_mask) break;
    }
    if (any_mask) fs::create_directories(base / "masks");
    if (dataset.has_gt_flow) fs::create_directories(base / "flow");

    json meta;
    meta["fx"] = dataset.camera.fx;
    meta["fy"] = dataset.camera.fy;
    meta["cx"] = dataset.camera.cx;
    meta["cy"] = dataset.camera.cy;
    meta["width"] = dataset.camera.width;
    meta["height"] = dataset.camera.height;
    meta["near"] = dataset.camera.near_plane;
    meta["far"] = dataset.camera.far_plane;
    std::vector<double> w2c;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) w2c.push_back(dataset.camera.world_to_camera(r, c));
    meta["world_to_camera"] = w2c;
    meta["depth_scale"] = dataset.depth_scale;
    if (dataset.texture_region) {
        meta["texture_region"] = std::vector<int>(dataset.texture_region->begin(),
                                                  dataset.texture_region->end());
    }
    std::ofstream os(base / "camera.json");
    os << meta.dump(2) << "\n";
    if (!os) throw DataError("cannot write camera metadata under " + root);

    for (size_t i = 0; i < dataset.frames.size(); ++i) {
        const FrameRecord& f = dataset.frames[i];
        int idx = static_cast<int>(i);
        write_png_rgb((base / "images" / frame_name(idx, ".png")).string(), f.image);
        if (dataset.has_depth && !f.depth.empty()) {
            write_png_gray16((base / "depth" / frame_name(idx, ".png")).string(), f.depth,
                             dataset.depth_scale);
        }
        if (any_mask) {
            write_png_mask((base / "masks" / frame_name(idx, ".png")).string(), f.mask);
        }
    }
    if (dataset.has_gt_flow) {
        for (size_t i = 1; i < dataset.gt_flows.size(); ++i) {
            int idx = static_cast<int>(i);
            write_flo((base / "flow" / frame_name(idx, ".flo")).string(), dataset.gt_flows[i]);
            write_png_mask((base / "flow" / frame_name(idx, "_valid.png")).string(),
                           dataset.gt_flows[i].valid);
        }
    }
}

}  // namespace fsplat
