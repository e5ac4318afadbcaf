#pragma once

#include <cstdint>
#include <exception>
#include <string>
#include <string_view>
#include <thread>

#include "fsplat/camera.hpp"
#include "fsplat/deformation.hpp"
#include "fsplat/densify.hpp"
#include "fsplat/gaussian_cloud.hpp"

namespace fsplat {

// Everything mutable the trainer owns. A value copy of this struct is a
// consistent snapshot, which is what the async writer serializes.
struct TrainerState {
    int stage = 1;
    int64_t iteration = 0;      // completed optimizer steps
    int64_t cloud_step = 0;     // Adam step counts per structure
    int64_t field_step = 0;
    double scene_extent = 1.0;
    int frame_count = 1;
    Camera camera;              // reference camera for standalone rendering
    GaussianCloud cloud;
    CloudMoments cloud_moments;
    DeformField field;
    DeformField field_m, field_v;
    DensifyStats densify_stats;
    std::string rng_state;      // engine stream, decimal serialization
};

uint64_t fnv1a64(std::string_view s);

// Single-file little-endian container: magic, version, config hash, then the
// raw parameter and moment buffers with their shapes. Loading validates every
// shape against the stored field config and throws DataError naming the first
// mismatch. expected_config_hash 0 skips the hash check (render/eval load
// checkpoints without the training config).
void save_checkpoint(const std::string& path, const TrainerState& state, uint64_t config_hash);
TrainerState load_checkpoint(const std::string& path, uint64_t expected_config_hash = 0);

// Serializes snapshots on a worker thread so optimization never blocks on
// disk. write() joins the previous write first; errors surface on the next
// write() or wait().
class CheckpointWriter {
  public:
    CheckpointWriter() = default;
    ~CheckpointWriter();
    CheckpointWriter(const CheckpointWriter&) = delete;
    CheckpointWriter& operator=(const CheckpointWriter&) = delete;

    void write(std::string path, TrainerState snapshot, uint64_t config_hash);
    void wait();

  private:
    std::thread worker_;
    std::exception_ptr error_;
};

}  // namespace fsplat
