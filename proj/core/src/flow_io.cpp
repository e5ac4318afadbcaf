#include "fsplat/flow_io.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <vector>

#include "fsplat/errors.hpp"

namespace fsplat {

namespace {
constexpr float kFloMagic = 202021.25f;
}

void write_flo(const std::string& path, const FlowField& flow) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open flow file for writing: " + path);
    int32_t w = flow.u.width(), h = flow.u.height();
    os.write(reinterpret_cast<const char*>(&kFloMagic), 4);
    os.write(reinterpret_cast<const char*>(&w), 4);
    os.write(reinterpret_cast<const char*>(&h), 4);
    std::vector<float> row(static_cast<size_t>(w) * 2);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            row[x * 2 + 0] = static_cast<float>(flow.u.at(y, x, 0));
            row[x * 2 + 1] = static_cast<float>(flow.v.at(y, x, 0));
        }
        os.write(reinterpret_cast<const char*>(row.data()),
                 static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!os) throw DataError("flow write failed: " + path);
}

FlowField read_flo(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open flow file: " + path);
    float magic = 0;
    int32_t w = 0, h = 0;
    is.read(reinterpret_cast<char*>(&magic), 4);
    is.read(reinterpret_cast<char*>(&w), 4);
    is.read(reinterpret_cast<char*>(&h), 4);
    if (!is || magic != kFloMagic) throw DataError("not a flow file: " + path);
    if (w <= 0 || h <= 0 || w > 1 << 16 || h > 1 << 16) {
        throw DataError("flow file has implausible dimensions: " + path);
    }
    FlowField flow;
    flow.u = Image(h, w, 1);
    flow.v = Image(h, w, 1);
    flow.valid = Image(h, w, 1, 1.0);
    std::vector<float> row(static_cast<size_t>(w) * 2);
    for (int y = 0; y < h; ++y) {
        is.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!is) throw DataError("flow file truncated: " + path);
        for (int x = 0; x < w; ++x) {
            flow.u.at(y, x, 0) = row[x * 2 + 0];
            flow.v.at(y, x, 0) = row[x * 2 + 1];
        }
    }
    return flow;
}

Image flow_to_rgb(const FlowField& flow, double max_mag) {
    const int h = flow.u.height(), w = flow.u.width();
    if (max_mag <= 0) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double m = std::hypot(flow.u.at(y, x, 0), flow.v.at(y, x, 0));
                if (m > max_mag) max_mag = m;
            }
        }
        if (max_mag <= 0) max_mag = 1.0;
    }
    Image rgb(h, w, 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!flow.valid.empty() && flow.valid.at(y, x, 0) == 0.0) continue;
            double u = flow.u.at(y, x, 0), v = flow.v.at(y, x, 0);
            double mag = std::min(std::hypot(u, v) / max_mag, 1.0);
            double hue = (std::atan2(-v, -u) / M_PI + 1.0) / 2.0;  // [0,1)
            double hh = hue * 6.0;
            int sector = static_cast<int>(hh) % 6;
            double f = hh - std::floor(hh);
            double p = 1.0 - mag;
            double q = 1.0 - mag * f;
            double t = 1.0 - mag * (1.0 - f);
            double r, g, b;
            switch (sector) {
                case 0: r = 1, g = t, b = p; break;
                case 1: r = q, g = 1, b = p; break;
                case 2: r = p, g = 1, b = t; break;
                case 3: r = p, g = q, b = 1; break;
                case 4: r = t, g = p, b = 1; break;
                default: r = 1, g = p, b = q; break;
            }
            rgb.at(y, x, 0) = r;
            rgb.at(y, x, 1) = g;
            rgb.at(y, x, 2) = b;
        }
    }
    return rgb;
}

}  // namespace fsplat
