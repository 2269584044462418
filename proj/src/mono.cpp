#include "iabev/mono.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "iabev/util.hpp"

namespace iabev::mono {

namespace {

using scene::Category;

constexpr std::array<Category, 1> kGroup0 = {Category::kCar};
constexpr std::array<Category, 2> kGroup1 = {Category::kTruck, Category::kConstructionVehicle};
constexpr std::array<Category, 2> kGroup2 = {Category::kBus, Category::kTrailer};
constexpr std::array<Category, 1> kGroup3 = {Category::kBarrier};
constexpr std::array<Category, 2> kGroup4 = {Category::kMotorcycle, Category::kBicycle};
constexpr std::array<Category, 2> kGroup5 = {Category::kPedestrian, Category::kTrafficCone};

Eigen::VectorXd softmax_column(const Eigen::VectorXd& logits) {
    const double m = logits.maxCoeff();
    Eigen::VectorXd e = (logits.array() - m).exp();
    return e / e.sum();
}

}  // namespace

int group_of(scene::Category category) {
    switch (category) {
        case Category::kCar: return 0;
        case Category::kTruck:
        case Category::kConstructionVehicle: return 1;
        case Category::kBus:
        case Category::kTrailer: return 2;
        case Category::kBarrier: return 3;
        case Category::kMotorcycle:
        case Category::kBicycle: return 4;
        case Category::kPedestrian:
        case Category::kTrafficCone: return 5;
    }
    throw std::domain_error("group_of: unknown category");
}

std::span<const scene::Category> group_members(int group) {
    switch (group) {
        case 0: return kGroup0;
        case 1: return kGroup1;
        case 2: return kGroup2;
        case 3: return kGroup3;
        case 4: return kGroup4;
        case 5: return kGroup5;
        default: throw std::domain_error("group_members: group out of range");
    }
}

double group_height(int group, const scene::CategorySizeTable& sizes) {
    const auto members = group_members(group);
    double sum = 0.0;
    for (Category c : members) sum += sizes.height(c);
    return sum / static_cast<double>(members.size());
}

Eigen::MatrixXd DepthDistribution::probabilities() const {
    Eigen::MatrixXd p(logits.rows(), logits.cols());
    for (Eigen::Index c = 0; c < logits.cols(); ++c) p.col(c) = softmax_column(logits.col(c));
    return p;
}

double prior_depth(const scene::InstanceMask& mask, const geometry::Intrinsics& k,
                   int group, const scene::CategorySizeTable& sizes,
                   const geometry::DepthBins& bins) {
    const double h_px = mask.box_h_norm * k.height;
    if (!(h_px > 0.0)) throw std::domain_error("prior_depth: degenerate box height");
    const double d = k.fy * group_height(group, sizes) / h_px;
    return std::clamp(d, bins.d_min, bins.d_max);
}

DepthDistribution mono_logits(const scene::InstanceMask& mask, double prior,
                              const geometry::DepthBins& bins, double spread) {
    if (!(spread > 0.0)) throw std::domain_error("mono_logits: spread must be positive");
    Eigen::VectorXd column(bins.count);
    for (int k = 0; k < bins.count; ++k) {
        const double z = (bins.centers[k] - prior) / spread;
        column[k] = -0.5 * z * z;
    }
    DepthDistribution dist;
    dist.logits = column.replicate(1, static_cast<Eigen::Index>(mask.pixels.size()));
    return dist;
}

Eigen::VectorXd expected_depth(const DepthDistribution& dist, const geometry::DepthBins& bins) {
    if (!dist.logits.allFinite()) throw std::domain_error("expected_depth: non-finite logits");
    if (dist.logits.rows() != bins.count)
        throw std::domain_error("expected_depth: bin count mismatch");
    const Eigen::Map<const Eigen::VectorXd> centers(bins.centers.data(), bins.count);
    Eigen::VectorXd out(dist.logits.cols());
    for (Eigen::Index c = 0; c < dist.logits.cols(); ++c)
        out[c] = centers.dot(softmax_column(dist.logits.col(c)));
    return out;
}

double expected_depth(const Eigen::VectorXd& distribution, const geometry::DepthBins& bins) {
    if (distribution.size() != bins.count)
        throw std::domain_error("expected_depth: bin count mismatch");
    const Eigen::Map<const Eigen::VectorXd> centers(bins.centers.data(), bins.count);
    return centers.dot(distribution);
}

std::optional<double> vote_gt_depth(std::span<const scene::LidarSample> samples,
                                    const geometry::DepthBins& bins) {
    std::vector<int> votes(bins.count, 0);
    std::vector<double> sums(bins.count, 0.0);
    bool any = false;
    for (const scene::LidarSample& s : samples) {
        if (auto k = geometry::bin_index(s.depth, bins)) {
            ++votes[*k];
            sums[*k] += s.depth;
            any = true;
        }
    }
    if (!any) return std::nullopt;
    int best = 0;
    for (int k = 1; k < bins.count; ++k)
        if (votes[k] > votes[best]) best = k;  // ties keep the lower-depth bin
    return sums[best] / votes[best];
}

namespace {

template <typename PerPixel>
LossResult mean_of_means_loss(std::span<const SupervisedInstance> instances,
                              PerPixel residual) {
    if (instances.empty()) throw std::domain_error("depth loss: no supervised instances");
    const double n_inst = static_cast<double>(instances.size());
    std::vector<double> per_instance;
    per_instance.reserve(instances.size());
    LossResult out;
    out.grads.reserve(instances.size());
    for (const SupervisedInstance& inst : instances) {
        const Eigen::Index m = inst.pred.size();
        if (m == 0) throw std::domain_error("depth loss: instance without pixels");
        std::vector<double> sq(static_cast<std::size_t>(m));
        Eigen::VectorXd grad(m);
        for (Eigen::Index j = 0; j < m; ++j) {
            const double r = residual(inst, j);
            sq[static_cast<std::size_t>(j)] = r * r;
            grad[j] = 2.0 * r / (n_inst * static_cast<double>(m));
        }
        per_instance.push_back(pairwise_sum(sq) / static_cast<double>(m));
        out.grads.push_back(std::move(grad));
    }
    out.value = pairwise_sum(per_instance) / n_inst;
    return out;
}

}  // namespace

LossResult abs_depth_loss(std::span<const SupervisedInstance> instances) {
    // residual r = pred - d_gt; loss term (d_gt - pred)^2 = r^2
    return mean_of_means_loss(instances, [](const SupervisedInstance& inst, Eigen::Index j) {
        return inst.pred[j] - inst.voted_depth;
    });
}

LossResult rel_depth_loss(std::span<const SupervisedInstance> instances) {
    // ((d_gt - pred_j) - (d_gt - gt_j))^2 = (gt_j - pred_j)^2
    for (const SupervisedInstance& inst : instances)
        if (inst.gt.size() != inst.pred.size())
            throw std::domain_error("rel_depth_loss: pred/gt length mismatch");
    return mean_of_means_loss(instances, [](const SupervisedInstance& inst, Eigen::Index j) {
        return inst.pred[j] - inst.gt[j];
    });
}

CeLossResult ce_depth_loss(const DepthDistribution& dist,
                           std::span<const std::pair<int, double>> pixel_gt,
                           const geometry::DepthBins& bins) {
    if (dist.logits.rows() != bins.count)
        throw std::domain_error("ce_depth_loss: bin count mismatch");
    CeLossResult out;
    out.grad = Eigen::MatrixXd::Zero(dist.logits.rows(), dist.logits.cols());

    std::vector<std::pair<int, int>> used;  // (column, gt bin)
    for (const auto& [col, depth] : pixel_gt) {
        if (col < 0 || col >= dist.logits.cols())
            throw std::domain_error("ce_depth_loss: pixel column out of range");
        if (auto k = geometry::bin_index(depth, bins)) used.emplace_back(col, *k);
    }
    if (used.empty()) throw std::domain_error("ce_depth_loss: no pixel with in-range ground truth");

    const double inv_n = 1.0 / static_cast<double>(used.size());
    std::vector<double> terms;
    terms.reserve(used.size());
    for (const auto& [col, k] : used) {
        const Eigen::VectorXd p = softmax_column(dist.logits.col(col));
        terms.push_back(-std::log(p[k]));
        out.grad.col(col) += inv_n * p;
        out.grad(k, col) -= inv_n;
    }
    out.value = pairwise_sum(terms) * inv_n;
    out.supervised_pixels = static_cast<int>(used.size());
    return out;
}

double total_loss(double l_det, double l_ce, double l_abs, double l_rel,
                  const LossWeights& w) {
    if (!std::isfinite(l_det) || !std::isfinite(l_ce) || !std::isfinite(l_abs) ||
        !std::isfinite(l_rel))
        throw std::domain_error("total_loss: non-finite component");
    return w.det * l_det + w.ce * l_ce + w.abs * l_abs + w.rel * l_rel;
}

}  // namespace iabev::mono
