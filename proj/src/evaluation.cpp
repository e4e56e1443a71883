// SPDX-License-Identifier: Apache-2.0
#include "supernas/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace supernas {

std::vector<BnStats> recalibrate_bn(SupernetParams& params, const SubnetEncoding& enc, const DataBundle& data,
                                    int calib_batches, int batch_size) {
    if (calib_batches <= 0) throw ValueError("recalibration needs at least one calibration batch");
    if (data.calib.size() == 0) throw ValueError("recalibration: empty calibration split");
    auto batches = eval_batches(data.calib, data.mean, data.stddev, batch_size);
    if (int(batches.size()) > calib_batches) batches.resize(size_t(calib_batches));
    std::vector<BnAccum> accums(size_t(params.space.num_layers()));
    for (const auto& b : batches) {
        Graph g;
        build_forward(g, params, enc, g.input(b.x), BnMode::collect, nullptr, &accums);
    }
    std::vector<BnStats> stats;
    stats.reserve(accums.size());
    for (const auto& a : accums) stats.push_back(a.finalize());
    return stats;
}

std::vector<int> predict_classes(SupernetParams& params, const SubnetEncoding& enc, const Dataset& split,
                                 const std::vector<double>& mean, const std::vector<double>& stddev,
                                 int batch_size, const std::vector<BnStats>* bn_override) {
    if (split.size() == 0) throw ValueError("evaluation: empty dataset");
    std::vector<int> preds;
    preds.reserve(size_t(split.size()));
    for (const auto& b : eval_batches(split, mean, stddev, batch_size)) {
        const Tensor logits = slice_forward(params, enc, b.x, BnMode::eval, bn_override);
        const int k = logits.dim(1);
        for (int i = 0; i < logits.dim(0); ++i) {
            int best = 0;
            for (int j = 1; j < k; ++j)
                if (logits.at2(i, j) > logits.at2(i, best)) best = j;
            preds.push_back(best);
        }
    }
    return preds;
}

double eval_accuracy(SupernetParams& params, const SubnetEncoding& enc, const Dataset& split,
                     const std::vector<double>& mean, const std::vector<double>& stddev, int batch_size,
                     const std::vector<BnStats>* bn_override) {
    const auto preds = predict_classes(params, enc, split, mean, stddev, batch_size, bn_override);
    int64_t correct = 0;
    for (size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == split.labels[i]) ++correct;
    return double(correct) / double(preds.size());
}

AccuracyRecord train_standalone(const SearchSpace& base_space, const SubnetEncoding& enc,
                                const DataBundle& data, const AugmentPolicy& policy,
                                const StandaloneConfig& cfg, uint64_t seed) {
    validate_encoding(base_space, enc);
    SearchSpace sub = base_space;
    sub.channel_proxy = false;  // ground truth runs the candidate's real widths
    sub.activation = cfg.activation;
    for (size_t l = 0; l < sub.layers.size(); ++l) sub.layers[l].options = {enc.choices[l]};
    sub.validate();

    SupernetParams params = init_supernet(sub, seed);
    TrainConfig tc;
    tc.iterations = 0;
    tc.warmup_iterations = cfg.iterations;
    tc.warmup_lr = cfg.lr_init;
    tc.lr_init = cfg.lr_init;
    tc.batch_size = cfg.batch_size;
    tc.momentum = cfg.momentum;
    tc.weight_decay = cfg.weight_decay;
    tc.samples_per_step = 0;
    tc.augment = cfg.augment;
    SupernetTrainer trainer(params, data, policy, tc, seed, /*stage=*/1);
    trainer.run();

    const SubnetEncoding only = all_max_encoding(sub);
    AccuracyRecord rec;
    rec.enc = enc;
    rec.accuracy = eval_accuracy(params, only, data.val, data.mean, data.stddev, cfg.eval_batch_size);
    rec.source = "standalone";
    rec.seed = seed;
    return rec;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw ShapeError("pearson: length mismatch");
    const size_t n = xs.size();
    if (n < 2) throw ValueError("pearson: need at least 2 points");
    const auto [xmin, xmax] = std::minmax_element(xs.begin(), xs.end());
    const auto [ymin, ymax] = std::minmax_element(ys.begin(), ys.end());
    if (*xmin == *xmax || *ymin == *ymax)
        throw NumericError("pearson: zero variance, correlation undefined");
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= double(n);
    my /= double(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    return sxy / std::sqrt(sxx * syy);
}

std::vector<double> average_ranks(std::span<const double> xs) {
    const size_t n = xs.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t(0));
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double avg = 0.5 * (double(i + 1) + double(j + 1));  // 1-based, ties averaged
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw ShapeError("spearman: length mismatch");
    const auto rx = average_ranks(xs);
    const auto ry = average_ranks(ys);
    return pearson(rx, ry);
}

double kendall_tau_b(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw ShapeError("kendall: length mismatch");
    const size_t n = xs.size();
    if (n < 2) throw ValueError("kendall: need at least 2 points");
    int64_t concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            const double dx = xs[i] - xs[j];
            const double dy = ys[i] - ys[j];
            if (dx == 0.0) ++ties_x;
            if (dy == 0.0) ++ties_y;
            if (dx != 0.0 && dy != 0.0) {
                if (dx * dy > 0.0)
                    ++concordant;
                else
                    ++discordant;
            }
        }
    const int64_t n0 = int64_t(n) * (int64_t(n) - 1) / 2;
    const double denom = std::sqrt(double(n0 - ties_x)) * std::sqrt(double(n0 - ties_y));
    if (denom == 0.0) throw NumericError("kendall: zero variance, coefficient undefined");
    return double(concordant - discordant) / denom;
}

RankReport rank_correlations(const std::vector<AccuracyRecord>& records) {
    std::map<std::string, RankPair> by_enc;
    std::map<std::string, std::pair<bool, bool>> seen;  // (standalone, supernet)
    for (const auto& r : records) {
        const std::string key = r.enc.str();
        auto& pair = by_enc[key];
        pair.enc = r.enc;
        if (r.source == "standalone") {
            pair.standalone_acc = r.accuracy;
            seen[key].first = true;
        } else if (r.source == "supernet") {
            pair.supernet_acc = r.accuracy;
            seen[key].second = true;
        } else {
            throw ValueError("accuracy record with unknown source '" + r.source + "'");
        }
    }
    std::vector<std::string> orphans;
    for (const auto& [key, flags] : seen)
        if (!flags.first || !flags.second) orphans.push_back(key + (flags.first ? " (no supernet)" : " (no standalone)"));
    if (!orphans.empty()) {
        std::string msg = "unpaired encodings:";
        for (const auto& o : orphans) msg += " " + o;
        throw ValueError(msg);
    }
    RankReport rep;
    for (auto& [key, pair] : by_enc) rep.pairs.push_back(pair);
    rep.n = int(rep.pairs.size());
    if (rep.n < 2) throw ValueError("rank report needs at least 2 paired records");
    std::vector<double> xs, ys;
    for (const auto& p : rep.pairs) {
        xs.push_back(p.standalone_acc);
        ys.push_back(p.supernet_acc);
    }
    rep.pearson_abs = std::fabs(pearson(xs, ys));
    rep.spearman = spearman(xs, ys);
    rep.kendall_tau = kendall_tau_b(xs, ys);
    return rep;
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void write_accuracy_csv(const std::string& path, const std::vector<AccuracyRecord>& records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write accuracy table: " + path);
    out << "encoding,source,seed,accuracy\n";
    for (const auto& r : records)
        out << r.enc.str() << "," << r.source << "," << r.seed << "," << fmt_double(r.accuracy) << "\n";
}

void append_accuracy_csv(const std::string& path, const std::vector<AccuracyRecord>& records) {
    std::ifstream probe(path);
    const bool exists = probe.good();
    probe.close();
    std::ofstream out(path, std::ios::app);
    if (!out) throw IoError("cannot write accuracy table: " + path);
    if (!exists) out << "encoding,source,seed,accuracy\n";
    for (const auto& r : records)
        out << r.enc.str() << "," << r.source << "," << r.seed << "," << fmt_double(r.accuracy) << "\n";
}

std::vector<AccuracyRecord> read_accuracy_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifact("accuracy table not found: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "encoding,source,seed,accuracy")
        throw IoError("accuracy table " + path + ": bad header");
    std::vector<AccuracyRecord> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream is(line);
        std::string enc, source, seed, acc;
        if (!std::getline(is, enc, ',') || !std::getline(is, source, ',') || !std::getline(is, seed, ',') ||
            !std::getline(is, acc))
            throw IoError("accuracy table " + path + ": malformed line " + std::to_string(lineno));
        AccuracyRecord r;
        r.enc = SubnetEncoding::parse(enc);
        r.source = source;
        r.seed = std::stoull(seed);
        r.accuracy = std::stod(acc);
        out.push_back(std::move(r));
    }
    return out;
}

void write_report_json(const std::string& path, const RankReport& report) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write report: " + path);
    out << "{\n";
    out << "  \"n\": " << report.n << ",\n";
    out << "  \"pearson_abs\": " << fmt_double(report.pearson_abs) << ",\n";
    out << "  \"spearman\": " << fmt_double(report.spearman) << ",\n";
    out << "  \"kendall_tau\": " << fmt_double(report.kendall_tau) << "\n";
    out << "}\n";
}

void write_scatter_csv(const std::string& path, const RankReport& report) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write scatter data: " + path);
    out << "standalone_accuracy,supernet_accuracy\n";
    for (const auto& p : report.pairs)
        out << fmt_double(p.standalone_acc) << "," << fmt_double(p.supernet_acc) << "\n";
}

}  // namespace supernas
