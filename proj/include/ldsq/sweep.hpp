#pragma once

#include <atomic>
#include <chrono>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "ldsq/csv.hpp"
#include "ldsq/sda.hpp"
#include "ldsq/specfile.hpp"

namespace ldsq {

// Parameter sweeps over problem grids. Grid points run in a work pool with
// per-point derived seeds; output rows are ordered by grid index regardless
// of completion order.

struct SweepAxis {
    std::string name;
    std::vector<double> values;
};

struct SweepSpec {
    SpecNode problem_template;
    std::vector<SweepAxis> axes;
    std::vector<std::string> quantities;  // ldlr | sda | product_sda | k_lr | high_degree
    long long m = 1;
    int d = 1;  // -1 encodes the unbounded projection
    int k = 2;
};

inline SweepSpec sweep_from_spec(const SpecNode& root) {
    const SpecNode& block = root.get("sweep");
    SweepSpec sw;
    sw.problem_template = block.get("problem");
    for (std::size_t i = 0; i + 1 < block.items.size(); ++i) {
        if (!block.items[i].is_block && block.items[i].atom == "axis") {
            const SpecNode& ax = block.items[i + 1];
            SweepAxis axis;
            axis.name = ax.get_string("name");
            for (const auto& v : ax.get("values").items) axis.values.push_back(v.as_double());
            require(!axis.values.empty(), "sweep: empty axis");
            sw.axes.push_back(std::move(axis));
        }
    }
    require(!sw.axes.empty(), "sweep: grid must be nonempty");
    const SpecNode& q = block.get("quantities");
    for (const auto& item : q.items) sw.quantities.push_back(item.as_string());
    require(!sw.quantities.empty(), "sweep: no quantities requested");
    for (const auto& name : sw.quantities)
        require(name == "ldlr" || name == "sda" || name == "product_sda" || name == "k_lr" ||
                    name == "high_degree",
                "sweep: unknown quantity '" + name + "'");
    if (block.find("m")) sw.m = block.get_int("m");
    if (block.find("d")) sw.d = int(block.get_int("d"));
    if (block.find("k")) sw.k = int(block.get_int("k"));
    return sw;
}

struct SweepResult {
    CsvWriter csv;
    std::uint64_t feasible_points = 0;
    std::uint64_t total_points = 0;
};

namespace detail {

inline SpecNode with_overrides(const SpecNode& base, const std::vector<SweepAxis>& axes,
                               const std::vector<std::size_t>& idx, long long* m_override) {
    SpecNode out = base;
    for (std::size_t a = 0; a < axes.size(); ++a) {
        const double v = axes[a].values[idx[a]];
        if (axes[a].name == "m") {
            *m_override = (long long)(v);
            continue;
        }
        bool found = false;
        for (std::size_t i = 0; i + 1 < out.items.size(); ++i)
            if (!out.items[i].is_block && out.items[i].atom == axes[a].name) {
                out.items[i + 1].atom = format_double(v);
                out.items[i + 1].is_block = false;
                out.items[i + 1].items.clear();
                found = true;
            }
        if (!found) {
            SpecNode key, val;
            key.atom = axes[a].name;
            val.atom = format_double(v);
            out.items.push_back(key);
            out.items.push_back(val);
        }
    }
    return out;
}

}  // namespace detail

inline SweepResult run_sweep(const SweepSpec& sw, std::uint64_t seed, int jobs = 1) {
    std::vector<std::string> header = {"problem-id"};
    for (const auto& ax : sw.axes) header.push_back(ax.name);
    header.insert(header.end(), {"quantity", "value", "stderr", "seed", "status"});

    std::uint64_t total = 1;
    for (const auto& ax : sw.axes) total *= ax.values.size();

    struct Row {
        std::vector<std::vector<std::string>> cells;
        bool feasible = false;
    };
    std::vector<Row> rows(total);

    auto work = [&](std::uint64_t g) {
        std::vector<std::size_t> idx(sw.axes.size());
        std::uint64_t rem = g;
        for (std::size_t a = sw.axes.size(); a-- > 0;) {
            idx[a] = rem % sw.axes[a].values.size();
            rem /= sw.axes[a].values.size();
        }
        const std::uint64_t point_seed = derive_seed(seed, g);
        long long m = sw.m;
        Row& row = rows[g];
        std::vector<std::string> prefix;
        std::string id = "?";
        auto emit = [&](const std::string& quantity, const std::string& value,
                        const std::string& se, const std::string& status) {
            std::vector<std::string> cells = {id};
            for (std::size_t a = 0; a < sw.axes.size(); ++a)
                cells.push_back(format_double(sw.axes[a].values[idx[a]]));
            cells.insert(cells.end(), {quantity, value, se, std::to_string(point_seed), status});
            row.cells.push_back(std::move(cells));
        };
        SpecNode point_spec;
        try {
            point_spec = detail::with_overrides(sw.problem_template, sw.axes, idx, &m);
            auto z = instance_from_spec(point_spec);
            id = z.id;
            PairSpectrum sp = z.spectrum ? *z.spectrum : exact_spectrum(z.problem);
            const Degree d = sw.d < 0 ? Degree::unbounded() : Degree(sw.d);
            for (const auto& quantity : sw.quantities) {
                try {
                    double value = 0.0, se = 0.0;
                    std::string value_str;
                    if (quantity == "ldlr") {
                        auto rep = ldlr_norm(sp, m, SamplewiseDegree(d, sw.k));
                        value = rep.squared_norm;
                        se = rep.stderr_value;
                    } else if (quantity == "sda") {
                        auto rep = sda(atoms_of(sp), double(m));
                        value_str = rep.unbounded ? "unbounded" : std::to_string(rep.q);
                    } else if (quantity == "product_sda") {
                        auto rep = product_sda(z.problem, double(m));
                        value_str = rep.unbounded ? "unbounded" : std::to_string(rep.q_lower);
                    } else if (quantity == "k_lr") {
                        value = k_sample_lr_norm(sp, sw.k).uncentered;
                    } else if (quantity == "high_degree") {
                        value = high_degree_norm(sp, d, sw.k);
                    }
                    if (value_str.empty()) {
                        require(std::isfinite(value), "non-finite intermediate");
                        value_str = format_double(value);
                    }
                    emit(quantity, value_str, se > 0.0 ? format_double(se) : "", "ok");
                    row.feasible = true;
                } catch (const std::exception& e) {
                    emit(quantity, "", "", std::string("infeasible: ") + e.what());
                }
            }
        } catch (const std::exception& e) {
            emit("", "", "", std::string("infeasible: ") + e.what());
        }
    };

    if (jobs <= 1) {
        for (std::uint64_t g = 0; g < total; ++g) work(g);
    } else {
        std::atomic<std::uint64_t> next{0};
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j)
            pool.emplace_back([&] {
                for (;;) {
                    const std::uint64_t g = next.fetch_add(1);
                    if (g >= total) return;
                    work(g);
                }
            });
        for (auto& t : pool) t.join();
    }

    SweepResult out{CsvWriter(header), 0, total};
    for (auto& row : rows) {
        if (row.feasible) ++out.feasible_points;
        for (auto& cells : row.cells) out.csv.add_row(cells);
    }
    return out;
}

}  // namespace ldsq
