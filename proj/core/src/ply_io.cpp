#include "fsplat/ply_io.hpp"

#include <fstream>
#include <vector>

#include "fsplat/errors.hpp"

namespace fsplat {

void write_ply(const std::string& path, const GaussianCloud& cloud) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open ply for writing: " + path);

    const int per_channel = cloud.sh_coeffs_per_channel();
    const int n_rest = 3 * (per_channel - 1);
    os << "ply\nformat binary_little_endian 1.0\n";
    os << "element vertex " << cloud.size() << "\n";
    for (const char* p : {"x", "y", "z"}) os << "property float " << p << "\n";
    for (int c = 0; c < 3; ++c) os << "property float f_dc_" << c << "\n";
    for (int c = 0; c < n_rest; ++c) os << "property float f_rest_" << c << "\n";
    os << "property float opacity\n";
    for (int c = 0; c < 3; ++c) os << "property float scale_" << c << "\n";
    for (int c = 0; c < 4; ++c) os << "property float rot_" << c << "\n";
    os << "end_header\n";

    std::vector<float> row(3 + 3 + n_rest + 1 + 3 + 4);
    for (size_t i = 0; i < cloud.size(); ++i) {
        size_t k = 0;
        for (int c = 0; c < 3; ++c) row[k++] = static_cast<float>(cloud.positions[i][c]);
        const double* sh = cloud.sh_ptr(i);
        for (int c = 0; c < 3; ++c) row[k++] = static_cast<float>(sh[c]);
        // Viewer layout groups the higher-order terms channel-major.
        for (int c = 0; c < 3; ++c) {
            for (int j = 1; j < per_channel; ++j) {
                row[k++] = static_cast<float>(sh[j * 3 + c]);
            }
        }
        row[k++] = static_cast<float>(cloud.opacity_logits[i]);
        for (int c = 0; c < 3; ++c) row[k++] = static_cast<float>(cloud.log_scales[i][c]);
        for (int c = 0; c < 4; ++c) row[k++] = static_cast<float>(cloud.rotations[i][c]);
        os.write(reinterpret_cast<const char*>(row.data()),
                 static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!os) throw DataError("ply write failed: " + path);
}

}  // namespace fsplat
