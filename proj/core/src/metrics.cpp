#include "kseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "kseg/rng.hpp"

namespace kseg {

double dice_score(const std::vector<std::uint8_t>& pred,
                  const std::vector<std::uint8_t>& gt, std::uint8_t cls) {
    if (pred.size() != gt.size())
        throw std::invalid_argument("dice_score: size mismatch");
    std::size_t np = 0, ng = 0, inter = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] == cls, g = gt[i] == cls;
        np += p;
        ng += g;
        inter += p && g;
    }
    if (np == 0 && ng == 0) return 1.0;
    if (np == 0 || ng == 0) return 0.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(np + ng);
}

double hausdorff_frame(const std::vector<std::pair<int, int>>& a,
                       const std::vector<std::pair<int, int>>& b) {
    if (a.empty() || b.empty())
        throw std::invalid_argument("hausdorff_frame: empty point set");
    auto directed = [](const std::vector<std::pair<int, int>>& from,
                       const std::vector<std::pair<int, int>>& to) {
        double worst = 0.0;
        for (const auto& [ay, ax] : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& [by, bx] : to) {
                const double dy = ay - by, dx = ax - bx;
                best = std::min(best, dy * dy + dx * dx);
            }
            worst = std::max(worst, best);
        }
        return std::sqrt(worst);
    };
    return std::max(directed(a, b), directed(b, a));
}

namespace {

// mask pixels with at least one non-mask 4-neighbor (grid edges count as outside)
std::vector<std::pair<int, int>> boundary_pixels(const std::uint8_t* labels, std::uint8_t cls,
                                                 int height, int width) {
    auto in_mask = [&](int y, int x) {
        return y >= 0 && y < height && x >= 0 && x < width &&
               labels[static_cast<std::size_t>(y) * width + x] == cls;
    };
    std::vector<std::pair<int, int>> out;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            if (in_mask(y, x) && (!in_mask(y - 1, x) || !in_mask(y + 1, x) ||
                                  !in_mask(y, x - 1) || !in_mask(y, x + 1)))
                out.emplace_back(y, x);
    return out;
}

struct Welford {
    double mean = 0.0, m2 = 0.0;
    int n = 0;
    void push(double x) {
        ++n;
        const double d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    double std() const { return n > 1 ? std::sqrt(m2 / n) : 0.0; }
};

}  // namespace

HausdorffResult hausdorff(const std::vector<std::uint8_t>& pred,
                          const std::vector<std::uint8_t>& gt, std::uint8_t cls,
                          int frames, int height, int width) {
    if (pred.size() != gt.size() ||
        pred.size() != static_cast<std::size_t>(frames) * height * width)
        throw std::invalid_argument("hausdorff: size mismatch");
    HausdorffResult res;
    double acc = 0.0;
    const std::size_t hw = static_cast<std::size_t>(height) * width;
    for (int t = 0; t < frames; ++t) {
        const auto bp = boundary_pixels(pred.data() + t * hw, cls, height, width);
        const auto bg = boundary_pixels(gt.data() + t * hw, cls, height, width);
        if (bp.empty() || bg.empty()) {
            res.frames_skipped++;
            continue;
        }
        acc += hausdorff_frame(bp, bg);
        res.frames_used++;
    }
    if (res.frames_used > 0) res.value = acc / res.frames_used;
    return res;
}

MetricReport evaluate(const ModelParams& params, const ModelConfig& mc,
                      const std::vector<CineScan>& scans, const EvalConfig& cfg) {
    MetricReport report;
    for (double R : cfg.accelerations) {
        MetricReport::Row row;
        row.acceleration = R;
        const int n_fg = mc.classes - 1;
        std::vector<Welford> dice_w(n_fg), hd_w(n_fg);
        Welford fg_dice_w, fg_hd_w;
        std::vector<int> hd_missing(n_fg, 0);

        for (std::size_t si = 0; si < scans.size(); ++si) {
            const CineScan& scan = scans[si];
            UndersampleOptions opt = cfg.sampling;
            opt.acceleration = R;
            Rng rng(mix_seed(cfg.seed, (static_cast<std::uint64_t>(R) << 32) + si));
            const auto under = undersample(scan, opt, rng);
            const auto seg = predict_segmentation(params, mc, under.samples, scan.frames,
                                                  scan.height, scan.width);
            double fg_dice = 0.0, fg_hd = 0.0;
            int fg_hd_n = 0;
            for (int c = 1; c < mc.classes; ++c) {
                const double d = dice_score(seg.labels, scan.labels,
                                            static_cast<std::uint8_t>(c));
                dice_w[c - 1].push(d);
                fg_dice += d;
                const auto hd = hausdorff(seg.labels, scan.labels,
                                          static_cast<std::uint8_t>(c), scan.frames,
                                          scan.height, scan.width);
                if (hd.value) {
                    hd_w[c - 1].push(*hd.value);
                    fg_hd += *hd.value;
                    fg_hd_n++;
                } else {
                    hd_missing[c - 1]++;
                }
            }
            fg_dice /= n_fg;
            fg_dice_w.push(fg_dice);
            row.scan_dice.push_back(fg_dice);
            if (fg_hd_n > 0) fg_hd_w.push(fg_hd / fg_hd_n);
        }

        for (int c = 0; c < n_fg; ++c) {
            ClassStats cs;
            cs.dice_mean = dice_w[c].mean;
            cs.dice_std = dice_w[c].std();
            cs.hd_mean = hd_w[c].mean;
            cs.hd_std = hd_w[c].std();
            cs.hd_missing = hd_missing[c];
            row.per_class.push_back(cs);
        }
        row.foreground_mean.dice_mean = fg_dice_w.mean;
        row.foreground_mean.dice_std = fg_dice_w.std();
        row.foreground_mean.hd_mean = fg_hd_w.mean;
        row.foreground_mean.hd_std = fg_hd_w.std();
        report.rows.push_back(std::move(row));
    }
    return report;
}

namespace {

std::string pm(double mean, double std) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(3) << mean << " ± " << std;
    return os.str();
}

}  // namespace

std::string MetricReport::to_table() const {
    std::ostringstream os;
    os << "Acc.  | Metric |";
    if (!rows.empty()) {
        for (std::size_t c = 0; c < rows[0].per_class.size(); ++c)
            os << " class" << (c + 1) << "          |";
    }
    os << " foreground mean\n";
    for (const auto& row : rows) {
        std::ostringstream acc;
        acc << row.acceleration << "x";
        os << std::left << std::setw(5) << acc.str() << " | Dice   |";
        for (const auto& cs : row.per_class) os << " " << pm(cs.dice_mean, cs.dice_std) << " |";
        os << " " << pm(row.foreground_mean.dice_mean, row.foreground_mean.dice_std) << "\n";
        os << "      | HD     |";
        for (const auto& cs : row.per_class) os << " " << pm(cs.hd_mean, cs.hd_std) << " |";
        os << " " << pm(row.foreground_mean.hd_mean, row.foreground_mean.hd_std) << "\n";
    }
    return os.str();
}

std::string MetricReport::to_key_values() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(3);
    for (const auto& row : rows) {
        const std::string base = "R" + std::to_string(static_cast<int>(row.acceleration));
        for (std::size_t c = 0; c < row.per_class.size(); ++c) {
            const auto& cs = row.per_class[c];
            const std::string cls = ".class" + std::to_string(c + 1);
            os << base << cls << ".dice.mean=" << cs.dice_mean << "\n";
            os << base << cls << ".dice.std=" << cs.dice_std << "\n";
            os << base << cls << ".hd.mean=" << cs.hd_mean << "\n";
            os << base << cls << ".hd.std=" << cs.hd_std << "\n";
            os << base << cls << ".hd.missing=" << cs.hd_missing << "\n";
        }
        os << base << ".foreground.dice.mean=" << row.foreground_mean.dice_mean << "\n";
        os << base << ".foreground.dice.std=" << row.foreground_mean.dice_std << "\n";
        os << base << ".foreground.hd.mean=" << row.foreground_mean.hd_mean << "\n";
        os << base << ".foreground.hd.std=" << row.foreground_mean.hd_std << "\n";
    }
    return os.str();
}

}  // namespace kseg
