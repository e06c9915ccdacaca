#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsrnet/checkpoint.hpp"
#include "tsrnet/loss.hpp"
#include "tsrnet/optimizer.hpp"
#include "tsrnet/pipeline.hpp"

namespace tsrnet {

struct EpochStats {
    int epoch = 0;
    double mean_loss = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> history;
};

// Full optimization loop: per-step masks, forward, restoration loss,
// backprop, AdamW with per-step cosine decay. Single-threaded and
// bit-reproducible for a fixed seed.
inline TrainResult train(TsrNet& net, const std::vector<PreparedRecord>& train_set,
                         const TrainConfig& tc, const MaskRatios& mask_ratios,
                         std::uint64_t seed,
                         const std::filesystem::path& checkpoint_dir = {},
                         const std::string& fingerprint = "",
                         std::ostream& log = std::cerr) {
    if (train_set.empty()) throw std::invalid_argument("train: empty train set");

    AdamWConfig ac;
    ac.beta1 = tc.beta1;
    ac.beta2 = tc.beta2;
    ac.eps = tc.eps;
    ac.weight_decay = tc.weight_decay;
    AdamW opt(ac);

    const int n = static_cast<int>(train_set.size());
    const int steps_per_epoch = (n + tc.batch_size - 1) / tc.batch_size;
    const long total_steps = static_cast<long>(steps_per_epoch) * tc.epochs;

    TrainResult result;
    long step = 0;
    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        // deterministic epoch shuffle
        Rng shuffle_rng(mix_seed(seed, 0x30, static_cast<std::uint64_t>(epoch)));
        std::vector<int> order(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
        for (int i = n - 1; i > 0; --i)
            std::swap(order[static_cast<std::size_t>(i)],
                      order[shuffle_rng.bounded(static_cast<std::uint64_t>(i + 1))]);

        double epoch_loss = 0.0;
        double last_lr = 0.0;
        for (int s = 0; s < steps_per_epoch; ++s) {
            std::vector<const PreparedRecord*> batch_records;
            for (int b = s * tc.batch_size; b < std::min(n, (s + 1) * tc.batch_size); ++b)
                batch_records.push_back(&train_set[static_cast<std::size_t>(
                    order[static_cast<std::size_t>(b)])]);

            const std::uint64_t step_seed = step_mask_seed(seed, epoch, s);
            Batch batch = make_batch(batch_records, &mask_ratios, step_seed);

            net.zero_grad();
            Restoration rest = net.forward(batch.ecg, batch.spec, /*training=*/true);
            const LossValue loss = restoration_loss(rest.y, rest.sigma, batch.target);
            if (!std::isfinite(loss.total))
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epoch) + " step " + std::to_string(s));
            const LossGradients g = loss_gradients(rest.y, rest.sigma, batch.target);
            net.backward(g.d_y, g.d_sigma);

            last_lr = cosine_lr(step, total_steps, tc.base_lr);
            opt.step(net.params(), last_lr);
            ++step;
            epoch_loss += loss.total;
        }

        EpochStats stats{epoch + 1, epoch_loss / steps_per_epoch, last_lr};
        result.history.push_back(stats);
        log << "epoch " << stats.epoch << "/" << tc.epochs << "  loss " << stats.mean_loss
            << "  lr " << stats.lr << "\n";

        if (!checkpoint_dir.empty() &&
            ((epoch + 1) % tc.checkpoint_interval == 0 || epoch + 1 == tc.epochs)) {
            std::filesystem::create_directories(checkpoint_dir);
            save_checkpoint(checkpoint_dir / ("epoch_" + std::to_string(epoch + 1) + ".ckpt"),
                            net.params(), fingerprint);
            save_checkpoint(checkpoint_dir / "final.ckpt", net.params(), fingerprint);
        }
    }
    return result;
}

inline void save_loss_history(const std::filesystem::path& path, const TrainResult& result) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("train: cannot write loss history " + path.string());
    os << "epoch\tmean_loss\tlr\n";
    for (const auto& e : result.history)
        os << e.epoch << "\t" << e.mean_loss << "\t" << e.lr << "\n";
}

} // namespace tsrnet
