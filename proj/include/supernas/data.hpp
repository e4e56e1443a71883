// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "supernas/rng.hpp"
#include "supernas/tensor.hpp"

namespace supernas {

/// One split of labelled images; pixel values live in [0,1] before
/// normalization.
struct Dataset {
    Tensor images;  // [N,C,H,W]
    std::vector<int> labels;

    int size() const { return images.numel() == 0 ? 0 : images.dim(0); }
};

struct AugmentPolicy {
    double brightness_delta_max = 0.1;
    double contrast_lo = 0.8;
    double contrast_hi = 1.2;
    double rotation_deg_max = 15.0;
    double hflip_prob = 0.5;

    bool identity() const {
        return brightness_delta_max == 0.0 && contrast_lo == 1.0 && contrast_hi == 1.0 &&
               rotation_deg_max == 0.0 && hflip_prob == 0.0;
    }
};

/// Train/val/calib splits plus the per-channel normalization computed from
/// the raw train split. Synthetic bundles also carry the class templates so
/// tests can run the nearest-template oracle.
struct DataBundle {
    Dataset train, val, calib;
    std::vector<double> mean, stddev;  // per channel
    Tensor templates;                  // [classes,C,H,W]; empty for file-backed data
    int num_classes = 0;

    void compute_normalization();
};

/// Class-conditional synthetic images: a smooth low-frequency template per
/// class plus iid pixel noise, split 80/10/10 with exactly uniform labels.
DataBundle synth_dataset(uint64_t seed, int n_per_class, int num_classes, std::array<int, 3> shape);

enum class CifarVariant { c10, c100 };

/// Reads one file in the standard CIFAR binary layout (label byte(s) +
/// 3072 image bytes per record, R/G/B planes row-major).
Dataset load_cifar_binary(const std::string& path, CifarVariant variant);
DataBundle cifar_bundle(const std::string& dir, CifarVariant variant, int calib_count);

/// In-place augmentation of one [C,H,W] image: brightness shift, contrast
/// scale about the per-channel mean, rotation (bilinear, zero pad),
/// horizontal flip; the result is clamped to [0,1].
void augment_image(double* chw, int c, int h, int w, Rng& rng, const AugmentPolicy& policy);

/// Rotation primitive used by augment_image (degrees, bilinear, zero pad).
void rotate_image(double* chw, int c, int h, int w, double degrees);

// Binary cache with a versioned header so synthetic datasets can be reused.
void save_bundle(const DataBundle& bundle, const std::string& path);
DataBundle load_bundle(const std::string& path);

/// Epoch-shuffled batches over the train split with deterministic per-sample
/// augmentation streams keyed by (stream_tag, epoch, index). Position is
/// (epoch, cursor) and serializes into checkpoints.
class BatchIterator {
  public:
    struct Batch {
        Tensor x;  // normalized [B,C,H,W]
        std::vector<int> labels;
    };

    BatchIterator(const Dataset& data, const std::vector<double>& mean, const std::vector<double>& stddev,
                  int batch_size, uint64_t seed, const AugmentPolicy& policy, bool augment,
                  uint64_t stream_tag);

    Batch next();

    uint64_t epoch() const { return epoch_; }
    int cursor() const { return cursor_; }
    void restore(uint64_t epoch, int cursor);

  private:
    void reshuffle();

    const Dataset* data_;
    std::vector<double> mean_, stddev_;
    int batch_size_;
    uint64_t seed_;
    AugmentPolicy policy_;
    bool augment_;
    uint64_t stream_tag_;
    uint64_t epoch_ = 0;
    int cursor_ = 0;
    std::vector<int> order_;
};

/// Fixed-order normalized batches for evaluation (no augmentation, last
/// batch may be short).
std::vector<BatchIterator::Batch> eval_batches(const Dataset& data, const std::vector<double>& mean,
                                               const std::vector<double>& stddev, int batch_size);

}  // namespace supernas
