// SPDX-License-Identifier: Apache-2.0
#include "supernas/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "supernas/common.hpp"

namespace supernas {

void DataBundle::compute_normalization() {
    const int c = train.images.dim(1);
    mean.assign(size_t(c), 0.0);
    stddev.assign(size_t(c), 0.0);
    const int n = train.size();
    const int64_t hw = int64_t(train.images.dim(2)) * train.images.dim(3);
    for (int ci = 0; ci < c; ++ci) {
        double s = 0.0, ss = 0.0;
        for (int i = 0; i < n; ++i) {
            const double* row = train.images.data() + (int64_t(i) * c + ci) * hw;
            for (int64_t k = 0; k < hw; ++k) {
                s += row[k];
                ss += row[k] * row[k];
            }
        }
        const double cnt = double(n) * double(hw);
        const double m = s / cnt;
        mean[size_t(ci)] = m;
        const double var = std::max(ss / cnt - m * m, 0.0);
        stddev[size_t(ci)] = std::max(std::sqrt(var), 1e-8);
    }
}

namespace {

// Smooth random field: a few low-frequency cosine modes around mid-gray.
void fill_template(double* chw, int c, int h, int w, Rng& rng) {
    for (int ci = 0; ci < c; ++ci) {
        struct ModeSpec {
            double fx, fy, amp, phase;
        };
        ModeSpec modes[3];
        for (auto& m : modes) {
            do {
                m.fx = double(rng.uniform_int(3));
                m.fy = double(rng.uniform_int(3));
            } while (m.fx == 0.0 && m.fy == 0.0);
            m.amp = rng.uniform(0.06, 0.18);
            m.phase = rng.uniform(0.0, 2.0 * M_PI);
        }
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double v = 0.5;
                for (const auto& m : modes)
                    v += m.amp * std::cos(2.0 * M_PI * (m.fx * x / double(w) + m.fy * y / double(h)) + m.phase);
                chw[(int64_t(ci) * h + y) * w + x] = std::clamp(v, 0.05, 0.95);
            }
    }
}

double template_rms_distance(const double* a, const double* b, int64_t n) {
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s / double(n));
}

}  // namespace

DataBundle synth_dataset(uint64_t seed, int n_per_class, int num_classes, std::array<int, 3> shape) {
    if (num_classes < 2) throw ValueError("synth_dataset: need at least 2 classes");
    if (n_per_class < 10) throw ValueError("synth_dataset: need at least 10 samples per class");
    const int c = shape[0], h = shape[1], w = shape[2];
    const int64_t chw = int64_t(c) * h * w;

    DataBundle bundle;
    bundle.num_classes = num_classes;
    bundle.templates = Tensor({num_classes, c, h, w});

    // Regenerate until class templates are pairwise separated; deterministic
    // and almost always succeeds on the first attempt.
    for (int attempt = 0; attempt < 64; ++attempt) {
        for (int cls = 0; cls < num_classes; ++cls) {
            Rng rng(derive_seed(seed, "synth-template", {uint64_t(cls), uint64_t(attempt)}));
            fill_template(bundle.templates.data() + cls * chw, c, h, w, rng);
        }
        double min_dist = 1e9;
        for (int a = 0; a < num_classes; ++a)
            for (int b = a + 1; b < num_classes; ++b)
                min_dist = std::min(min_dist, template_rms_distance(bundle.templates.data() + a * chw,
                                                                    bundle.templates.data() + b * chw, chw));
        if (min_dist >= 0.12) break;
    }

    const double noise_std = 0.40;
    const int n_train = int(std::lround(0.8 * n_per_class));
    const int n_val = int(std::lround(0.1 * n_per_class));
    const int n_calib = n_per_class - n_train - n_val;
    if (n_calib <= 0) throw ValueError("synth_dataset: split sizes collapsed");

    auto alloc = [&](Dataset& d, int per_class) {
        d.images = Tensor({per_class * num_classes, c, h, w});
        d.labels.assign(size_t(per_class) * num_classes, 0);
    };
    alloc(bundle.train, n_train);
    alloc(bundle.val, n_val);
    alloc(bundle.calib, n_calib);

    for (int cls = 0; cls < num_classes; ++cls) {
        const double* tpl = bundle.templates.data() + cls * chw;
        for (int i = 0; i < n_per_class; ++i) {
            Rng rng(derive_seed(seed, "synth-sample", {uint64_t(cls), uint64_t(i)}));
            Dataset* dst = nullptr;
            int pos = 0;
            if (i < n_train) {
                dst = &bundle.train;
                pos = cls * n_train + i;
            } else if (i < n_train + n_val) {
                dst = &bundle.val;
                pos = cls * n_val + (i - n_train);
            } else {
                dst = &bundle.calib;
                pos = cls * n_calib + (i - n_train - n_val);
            }
            double* img = dst->images.data() + int64_t(pos) * chw;
            for (int64_t k = 0; k < chw; ++k)
                img[k] = std::clamp(tpl[k] + noise_std * rng.normal(), 0.0, 1.0);
            dst->labels[size_t(pos)] = cls;
        }
    }
    bundle.compute_normalization();
    return bundle;
}

Dataset load_cifar_binary(const std::string& path, CifarVariant variant) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open CIFAR file: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const int64_t label_bytes = variant == CifarVariant::c10 ? 1 : 2;
    const int64_t record = label_bytes + 3072;
    if (bytes.empty() || int64_t(bytes.size()) % record != 0) {
        const int64_t n_full = int64_t(bytes.size()) / record;
        throw IoError("CIFAR file " + path + ": size " + std::to_string(bytes.size()) +
                      " is not a multiple of the record size " + std::to_string(record) + " (truncated at byte " +
                      std::to_string(n_full * record) + ", expected " + std::to_string((n_full + 1) * record) +
                      ")");
    }
    const int n = int(int64_t(bytes.size()) / record);
    Dataset d;
    d.images = Tensor({n, 3, 32, 32});
    d.labels.resize(size_t(n));
    for (int i = 0; i < n; ++i) {
        const unsigned char* rec = bytes.data() + int64_t(i) * record;
        const int label = int(rec[label_bytes - 1]);  // c100: the fine label
        d.labels[size_t(i)] = label;
        double* img = d.images.data() + int64_t(i) * 3072;
        for (int k = 0; k < 3072; ++k) img[k] = double(rec[label_bytes + k]) / 255.0;
    }
    return d;
}

DataBundle cifar_bundle(const std::string& dir, CifarVariant variant, int calib_count) {
    DataBundle bundle;
    std::vector<Dataset> parts;
    if (variant == CifarVariant::c10) {
        for (int i = 1; i <= 5; ++i) parts.push_back(load_cifar_binary(dir + "/data_batch_" + std::to_string(i) + ".bin", variant));
        bundle.val = load_cifar_binary(dir + "/test_batch.bin", variant);
        bundle.num_classes = 10;
    } else {
        parts.push_back(load_cifar_binary(dir + "/train.bin", variant));
        bundle.val = load_cifar_binary(dir + "/test.bin", variant);
        bundle.num_classes = 100;
    }
    int total = 0;
    for (const auto& p : parts) total += p.size();
    if (calib_count <= 0 || calib_count >= total) throw ValueError("cifar_bundle: bad calibration count");

    bundle.calib.images = Tensor({calib_count, 3, 32, 32});
    bundle.calib.labels.resize(size_t(calib_count));
    bundle.train.images = Tensor({total - calib_count, 3, 32, 32});
    bundle.train.labels.resize(size_t(total - calib_count));
    int idx = 0;
    for (const auto& p : parts) {
        for (int i = 0; i < p.size(); ++i, ++idx) {
            const bool to_calib = idx < calib_count;
            Dataset& dst = to_calib ? bundle.calib : bundle.train;
            const int pos = to_calib ? idx : idx - calib_count;
            std::memcpy(dst.images.data() + int64_t(pos) * 3072, p.images.data() + int64_t(i) * 3072,
                        3072 * sizeof(double));
            dst.labels[size_t(pos)] = p.labels[size_t(i)];
        }
    }
    bundle.compute_normalization();
    return bundle;
}

void rotate_image(double* chw, int c, int h, int w, double degrees) {
    const double theta = degrees * M_PI / 180.0;
    const double ct = std::cos(theta), st = std::sin(theta);
    const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
    std::vector<double> out(size_t(c) * h * w, 0.0);
    for (int ci = 0; ci < c; ++ci) {
        const double* src = chw + int64_t(ci) * h * w;
        double* dst = out.data() + int64_t(ci) * h * w;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                // inverse rotation of the output grid point
                const double sx = cx + (x - cx) * ct + (y - cy) * st;
                const double sy = cy - (x - cx) * st + (y - cy) * ct;
                const int x0 = int(std::floor(sx)), y0 = int(std::floor(sy));
                const double fx = sx - x0, fy = sy - y0;
                double acc = 0.0;
                for (int dy = 0; dy <= 1; ++dy)
                    for (int dx = 0; dx <= 1; ++dx) {
                        const int xs = x0 + dx, ys = y0 + dy;
                        if (xs < 0 || xs >= w || ys < 0 || ys >= h) continue;
                        const double wgt = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
                        acc += wgt * src[int64_t(ys) * w + xs];
                    }
                dst[int64_t(y) * w + x] = acc;
            }
    }
    std::memcpy(chw, out.data(), out.size() * sizeof(double));
}

void augment_image(double* chw, int c, int h, int w, Rng& rng, const AugmentPolicy& policy) {
    const int64_t n = int64_t(c) * h * w;
    const int64_t hw = int64_t(h) * w;
    if (policy.brightness_delta_max > 0.0) {
        const double d = rng.uniform(-policy.brightness_delta_max, policy.brightness_delta_max);
        for (int64_t i = 0; i < n; ++i) chw[i] += d;
    }
    if (!(policy.contrast_lo == 1.0 && policy.contrast_hi == 1.0)) {
        const double f = rng.uniform(policy.contrast_lo, policy.contrast_hi);
        for (int ci = 0; ci < c; ++ci) {
            double* row = chw + ci * hw;
            double m = 0.0;
            for (int64_t i = 0; i < hw; ++i) m += row[i];
            m /= double(hw);
            for (int64_t i = 0; i < hw; ++i) row[i] = m + f * (row[i] - m);
        }
    }
    if (policy.rotation_deg_max > 0.0) {
        const double deg = rng.uniform(-policy.rotation_deg_max, policy.rotation_deg_max);
        rotate_image(chw, c, h, w, deg);
    }
    if (policy.hflip_prob > 0.0 && rng.uniform01() < policy.hflip_prob) {
        for (int ci = 0; ci < c; ++ci)
            for (int y = 0; y < h; ++y) {
                double* row = chw + ci * hw + int64_t(y) * w;
                for (int x = 0; x < w / 2; ++x) std::swap(row[x], row[w - 1 - x]);
            }
    }
    if (!policy.identity())
        for (int64_t i = 0; i < n; ++i) chw[i] = std::clamp(chw[i], 0.0, 1.0);
}

namespace {

constexpr uint64_t kBundleMagic = 0x534e415344415431ULL;  // "SNASDAT1"

void write_u64(std::ofstream& out, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t read_u64(std::ifstream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw IoError("dataset cache: unexpected end of file");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
    return v;
}

void write_f64s(std::ofstream& out, const double* p, int64_t n) {
    for (int64_t i = 0; i < n; ++i) {
        uint64_t bits;
        std::memcpy(&bits, p + i, 8);
        write_u64(out, bits);
    }
}

void read_f64s(std::ifstream& in, double* p, int64_t n) {
    for (int64_t i = 0; i < n; ++i) {
        const uint64_t bits = read_u64(in);
        std::memcpy(p + i, &bits, 8);
    }
}

void write_dataset(std::ofstream& out, const Dataset& d) {
    write_u64(out, uint64_t(d.size()));
    for (int i = 0; i < 4; ++i) write_u64(out, uint64_t(d.images.dim(i)));
    write_f64s(out, d.images.data(), d.images.numel());
    for (int l : d.labels) write_u64(out, uint64_t(l));
}

Dataset read_dataset(std::ifstream& in) {
    Dataset d;
    const int n = int(read_u64(in));
    std::vector<int> shape(4);
    for (auto& s : shape) s = int(read_u64(in));
    if (shape[0] != n) throw IoError("dataset cache: inconsistent record count");
    d.images = Tensor(shape);
    read_f64s(in, d.images.data(), d.images.numel());
    d.labels.resize(size_t(n));
    for (auto& l : d.labels) l = int(read_u64(in));
    return d;
}

}  // namespace

void save_bundle(const DataBundle& bundle, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write dataset cache: " + path);
    write_u64(out, kBundleMagic);
    write_u64(out, 1);  // version
    write_u64(out, uint64_t(bundle.num_classes));
    write_dataset(out, bundle.train);
    write_dataset(out, bundle.val);
    write_dataset(out, bundle.calib);
    write_u64(out, uint64_t(bundle.mean.size()));
    write_f64s(out, bundle.mean.data(), int64_t(bundle.mean.size()));
    write_f64s(out, bundle.stddev.data(), int64_t(bundle.stddev.size()));
    const bool has_templates = bundle.templates.numel() > 0;
    write_u64(out, has_templates ? 1 : 0);
    if (has_templates) {
        for (int i = 0; i < 4; ++i) write_u64(out, uint64_t(bundle.templates.dim(i)));
        write_f64s(out, bundle.templates.data(), bundle.templates.numel());
    }
}

DataBundle load_bundle(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset cache: " + path);
    if (read_u64(in) != kBundleMagic) throw IoError("dataset cache: bad magic in " + path);
    const uint64_t version = read_u64(in);
    if (version != 1) throw IoError("dataset cache: unsupported version " + std::to_string(version));
    DataBundle b;
    b.num_classes = int(read_u64(in));
    b.train = read_dataset(in);
    b.val = read_dataset(in);
    b.calib = read_dataset(in);
    const size_t c = read_u64(in);
    b.mean.resize(c);
    b.stddev.resize(c);
    read_f64s(in, b.mean.data(), int64_t(c));
    read_f64s(in, b.stddev.data(), int64_t(c));
    if (read_u64(in) == 1) {
        std::vector<int> shape(4);
        for (auto& s : shape) s = int(read_u64(in));
        b.templates = Tensor(shape);
        read_f64s(in, b.templates.data(), b.templates.numel());
    }
    return b;
}

BatchIterator::BatchIterator(const Dataset& data, const std::vector<double>& mean,
                             const std::vector<double>& stddev, int batch_size, uint64_t seed,
                             const AugmentPolicy& policy, bool augment, uint64_t stream_tag)
    : data_(&data),
      mean_(mean),
      stddev_(stddev),
      batch_size_(std::min(batch_size, data.size())),
      seed_(seed),
      policy_(policy),
      augment_(augment),
      stream_tag_(stream_tag) {
    if (data.size() == 0) throw ValueError("batch iterator: empty dataset");
    if (batch_size_ <= 0) throw ValueError("batch iterator: batch size must be positive");
    reshuffle();
}

void BatchIterator::reshuffle() {
    const int n = data_->size();
    order_.resize(size_t(n));
    for (int i = 0; i < n; ++i) order_[size_t(i)] = i;
    Rng rng(derive_seed(seed_, "shuffle", {stream_tag_, epoch_}));
    for (int i = n - 1; i > 0; --i) std::swap(order_[size_t(i)], order_[size_t(rng.uniform_int(i + 1))]);
}

void BatchIterator::restore(uint64_t epoch, int cursor) {
    epoch_ = epoch;
    cursor_ = cursor;
    reshuffle();
}

BatchIterator::Batch BatchIterator::next() {
    const int n = data_->size();
    if (cursor_ + batch_size_ > n) {
        epoch_ += 1;
        cursor_ = 0;
        reshuffle();
    }
    const int c = data_->images.dim(1), h = data_->images.dim(2), w = data_->images.dim(3);
    const int64_t chw = int64_t(c) * h * w;
    Batch batch;
    batch.x = Tensor({batch_size_, c, h, w});
    batch.labels.resize(size_t(batch_size_));
    for (int i = 0; i < batch_size_; ++i) {
        const int idx = order_[size_t(cursor_ + i)];
        double* img = batch.x.data() + int64_t(i) * chw;
        std::memcpy(img, data_->images.data() + int64_t(idx) * chw, size_t(chw) * sizeof(double));
        if (augment_) {
            Rng rng(derive_seed(seed_, "augment", {stream_tag_, epoch_, uint64_t(idx)}));
            augment_image(img, c, h, w, rng, policy_);
        }
        for (int ci = 0; ci < c; ++ci) {
            double* row = img + ci * int64_t(h) * w;
            for (int64_t k = 0; k < int64_t(h) * w; ++k)
                row[k] = (row[k] - mean_[size_t(ci)]) / stddev_[size_t(ci)];
        }
        batch.labels[size_t(i)] = data_->labels[size_t(idx)];
    }
    cursor_ += batch_size_;
    return batch;
}

std::vector<BatchIterator::Batch> eval_batches(const Dataset& data, const std::vector<double>& mean,
                                               const std::vector<double>& stddev, int batch_size) {
    if (data.size() == 0) throw ValueError("eval batches: empty dataset");
    const int c = data.images.dim(1), h = data.images.dim(2), w = data.images.dim(3);
    const int64_t chw = int64_t(c) * h * w;
    std::vector<BatchIterator::Batch> out;
    for (int start = 0; start < data.size(); start += batch_size) {
        const int b = std::min(batch_size, data.size() - start);
        BatchIterator::Batch batch;
        batch.x = Tensor({b, c, h, w});
        batch.labels.resize(size_t(b));
        for (int i = 0; i < b; ++i) {
            double* img = batch.x.data() + int64_t(i) * chw;
            std::memcpy(img, data.images.data() + int64_t(start + i) * chw, size_t(chw) * sizeof(double));
            for (int ci = 0; ci < c; ++ci) {
                double* row = img + ci * int64_t(h) * w;
                for (int64_t k = 0; k < int64_t(h) * w; ++k)
                    row[k] = (row[k] - mean[size_t(ci)]) / stddev[size_t(ci)];
            }
            batch.labels[size_t(i)] = data.labels[size_t(start + i)];
        }
        out.push_back(std::move(batch));
    }
    return out;
}

}  // namespace supernas
