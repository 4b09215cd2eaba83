#include "hhfs/exploratory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hhfs/errors.hpp"

namespace hhfs {

int parse_pattern(const std::string& text) {
    if (text.empty() || text == "NA") return 0;
    int genes = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t next = text.find('+', pos);
        if (next == std::string::npos) next = text.size();
        std::string token = text.substr(pos, next - pos);
        if (token == "OR")
            genes |= gene_or;
        else if (token == "N")
            genes |= gene_n;
        else if (token == "S")
            genes |= gene_s;
        else
            throw ConfigError("unknown gene target '" + token + "' in pattern '" + text + "'");
        pos = next + 1;
    }
    return genes;
}

std::string format_pattern(int genes) {
    if (genes == 0) return "NA";
    std::string out;
    if (genes & gene_or) out += "OR";
    if (genes & gene_n) out += out.empty() ? "N" : "+N";
    if (genes & gene_s) out += out.empty() ? "S" : "+S";
    return out;
}

int maximal_pattern(const std::vector<int>& visit_genes) {
    if (visit_genes.empty()) throw ConfigError("maximal_pattern: no positive visits");
    auto score = [](int g) {
        int hits = ((g & gene_or) ? 1 : 0) + ((g & gene_n) ? 1 : 0) + ((g & gene_s) ? 1 : 0);
        return (hits << 3) | ((g & gene_s) ? 4 : 0) | ((g & gene_or) ? 2 : 0) |
               ((g & gene_n) ? 1 : 0);
    };
    int best = visit_genes.front();
    for (int g : visit_genes)
        if (score(g) > score(best)) best = g;
    return best;
}

PatternClass classify_pattern(int genes) {
    if (genes == (gene_or | gene_n | gene_s)) return PatternClass::or_n_s;
    if (genes == (gene_or | gene_n)) return PatternClass::or_n;
    return PatternClass::other;
}

std::string pattern_class_label(PatternClass c) {
    switch (c) {
        case PatternClass::or_n_s: return "OR+N+S";
        case PatternClass::or_n: return "OR+N";
        default: return "Other";
    }
}

std::int64_t AttackHistogram::size_total(int l) const {
    std::int64_t total = 0;
    for (int k = 0; k <= l; ++k) total += at(k, l);
    return total;
}

AttackHistogram histogram(const std::vector<ExploreHousehold>& households) {
    AttackHistogram h;
    for (const auto& hh : households) {
        int n = static_cast<int>(hh.size());
        if (n < AttackHistogram::min_size || n > max_household_size) continue;
        int k = 0;
        for (auto v : hh.positive) k += v ? 1 : 0;
        ++h.z[static_cast<std::size_t>(k)][static_cast<std::size_t>(n)];
    }
    return h;
}

DensityField density_points(const std::vector<ExploreHousehold>& households, double width,
                            int grid_dim) {
    if (!(width > 0.0) || width > 1.0) throw ConfigError("density_points: width must be in (0,1]");
    if (grid_dim < 1) throw ConfigError("density_points: grid_dim must be >= 1");

    DensityField field;
    field.grid_dim = grid_dim;
    field.width = width;

    for (const auto& hh : households) {
        if (hh.split.size() != hh.positive.size())
            throw ConfigError("density_points: split/positive length mismatch");
        int pos = 0, in1 = 0, in0 = 0, pos1 = 0, pos0 = 0;
        for (std::size_t i = 0; i < hh.positive.size(); ++i) {
            bool p = hh.positive[i] != 0;
            pos += p ? 1 : 0;
            if (hh.split[i] != 0) {
                ++in1;
                pos1 += p ? 1 : 0;
            } else {
                ++in0;
                pos0 += p ? 1 : 0;
            }
        }
        if (pos == 0 || in1 == 0 || in0 == 0) {
            ++field.excluded;
            continue;
        }
        field.points.push_back({static_cast<double>(pos1) / in1, static_cast<double>(pos0) / in0});
    }

    const std::size_t g = static_cast<std::size_t>(grid_dim);
    field.values.assign(g * g, 0.0);
    if (field.points.empty()) return field;

    const double cell = 1.0 / grid_dim;
    const double cell_area = cell * cell;
    const double norm = 1.0 / static_cast<double>(field.points.size());
    const double half = width / 2.0;

    for (const auto& pt : field.points) {
        double x0 = std::max(0.0, pt[0] - half), x1 = std::min(1.0, pt[0] + half);
        double y0 = std::max(0.0, pt[1] - half), y1 = std::min(1.0, pt[1] + half);
        double area = (x1 - x0) * (y1 - y0);
        if (!(area > 0.0)) continue;
        double mass_density = norm / (area * cell_area);

        int ix0 = std::max(0, static_cast<int>(std::floor(x0 * grid_dim)));
        int ix1 = std::min(grid_dim - 1, static_cast<int>(std::floor(x1 * grid_dim)));
        int iy0 = std::max(0, static_cast<int>(std::floor(y0 * grid_dim)));
        int iy1 = std::min(grid_dim - 1, static_cast<int>(std::floor(y1 * grid_dim)));
        for (int iy = iy0; iy <= iy1; ++iy) {
            double oy = std::min(y1, (iy + 1) * cell) - std::max(y0, iy * cell);
            if (!(oy > 0.0)) continue;
            for (int ix = ix0; ix <= ix1; ++ix) {
                double ox = std::min(x1, (ix + 1) * cell) - std::max(x0, ix * cell);
                if (!(ox > 0.0)) continue;
                field.values[static_cast<std::size_t>(iy) * g + static_cast<std::size_t>(ix)] +=
                    ox * oy * mass_density;
            }
        }
    }
    return field;
}

std::vector<std::string> default_pair_states() { return {"OR+N+S", "OR+N", "Other", "Negative"}; }

PairTable pair_residuals(const std::vector<std::vector<int>>& household_states,
                         const std::vector<std::string>& labels) {
    if (household_states.empty()) throw ConfigError("pair_residuals: empty household set");
    if (labels.empty()) throw ConfigError("pair_residuals: empty state list");

    PairTable t;
    t.states = labels;
    const std::size_t m = labels.size();
    t.y.assign(m * m, 0);
    t.z.assign(m, 0);

    for (const auto& hh : household_states) {
        for (int s : hh) {
            if (s < 0 || static_cast<std::size_t>(s) >= m)
                throw ConfigError("pair_residuals: state index out of range");
            ++t.z[static_cast<std::size_t>(s)];
        }
        auto n = static_cast<std::int64_t>(hh.size());
        t.individuals += n;
        t.denom += n * (n - 1);
        for (std::size_t i = 0; i < hh.size(); ++i)
            for (std::size_t j = 0; j < hh.size(); ++j) {
                if (i == j) continue;
                ++t.y[static_cast<std::size_t>(hh[i]) * m + static_cast<std::size_t>(hh[j])];
            }
    }

    t.expected.assign(m * m, 0.0);
    t.residual.assign(m * m, 0.0);
    const double total = static_cast<double>(t.individuals);
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b < m; ++b) {
            double pi_a = static_cast<double>(t.z[a]) / total;
            double pi_b = static_cast<double>(t.z[b]) / total;
            double e = pi_a * pi_b * static_cast<double>(t.denom);
            t.expected[a * m + b] = e;
            std::int64_t yab = t.y[a * m + b];
            if (e > 0.0)
                t.residual[a * m + b] = (static_cast<double>(yab) - e) / std::sqrt(e);
            else
                t.residual[a * m + b] =
                    yab > 0 ? std::numeric_limits<double>::infinity() : 0.0;
        }
    return t;
}

}  // namespace hhfs
