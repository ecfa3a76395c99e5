// flatlab command-line front end. One declarative JSON config per run; every
// report embeds the resolved config, its hash and the tool version.

#include <CLI11.hpp>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "flatlab/flatlab.hpp"

namespace fs = std::filesystem;
using namespace flatlab;
using io::json;
using io::num;

namespace {

// ---------------------------------------------------------------------------
// Config access with the JSON pointer of the offending key in every message.

struct Cfg {
    const json& j;
    std::string path;

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        throw validation_error("config " + path + "/" + key + ": " + what);
    }
    bool has(const std::string& key) const { return j.is_object() && j.contains(key); }
    const json& raw(const std::string& key) const {
        if (!has(key)) fail(key, "required key is missing");
        return j.at(key);
    }
    Cfg sub(const std::string& key) const { return Cfg{raw(key), path + "/" + key}; }

    double number(const std::string& key) const {
        const auto& v = raw(key);
        if (v.is_number()) return v.get<double>();
        if (v.is_string()) {
            try {
                return static_cast<double>(parse_rational(v.get<std::string>()));
            } catch (const validation_error&) {
            }
        }
        fail(key, "expected a number");
    }
    double number_or(const std::string& key, double d) const { return has(key) ? number(key) : d; }
    int integer(const std::string& key) const {
        const auto& v = raw(key);
        if (!v.is_number_integer()) fail(key, "expected an integer");
        return v.get<int>();
    }
    int integer_or(const std::string& key, int d) const { return has(key) ? integer(key) : d; }
    std::string string(const std::string& key) const {
        const auto& v = raw(key);
        if (!v.is_string()) fail(key, "expected a string");
        return v.get<std::string>();
    }
    std::string string_or(const std::string& key, const std::string& d) const { return has(key) ? string(key) : d; }
    bool boolean_or(const std::string& key, bool d) const {
        if (!has(key)) return d;
        const auto& v = raw(key);
        if (!v.is_boolean()) fail(key, "expected true or false");
        return v.get<bool>();
    }
    std::vector<double> numbers(const std::string& key) const {
        const auto& v = raw(key);
        if (v.is_number()) return {v.get<double>()};
        if (!v.is_array() || v.empty()) fail(key, "expected a nonempty list of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            Cfg c{v, path + "/" + key};
            if (!v[i].is_number()) c.fail(std::to_string(i), "expected a number");
            out.push_back(v[i].get<double>());
        }
        return out;
    }
    std::vector<int> integers(const std::string& key) const {
        const auto& v = raw(key);
        if (v.is_number_integer()) return {v.get<int>()};
        if (!v.is_array() || v.empty()) fail(key, "expected a nonempty list of integers");
        std::vector<int> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            Cfg c{v, path + "/" + key};
            if (!v[i].is_number_integer()) c.fail(std::to_string(i), "expected an integer");
            out.push_back(v[i].get<int>());
        }
        return out;
    }
};

struct Run {
    json config;
    fs::path base;  // directory of the config file, for relative paths
    fs::path out;
    bool exact = false;
    std::string command;
    std::vector<std::string> failures;  // property checks that did not hold

    Cfg root() const { return Cfg{config, ""}; }
    std::string resolve(const std::string& p) const {
        fs::path q(p);
        if (q.is_relative()) q = base / q;
        if (!fs::exists(q)) throw validation_error("referenced file does not exist: " + q.string());
        return q.string();
    }
    void check(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
    void write(const std::string& name, const std::string& text) const {
        io::write_text_file((out / name).string(), text);
    }
    void write_report(json results) const {
        json rep = io::report_envelope(config, command);
        rep["results"] = std::move(results);
        rep["exact"] = exact;
        rep["property_failures"] = failures;
        write("report.json", io::dump_report(rep));
    }
};

// ---------------------------------------------------------------------------
// Measure sources.

std::vector<Scale> scales_from(const Cfg& c, const std::string& key, int dim) {
    std::vector<Scale> out;
    for (int m : c.integers(key)) out.emplace_back(m, dim);
    return out;
}

CurveSpec curve_from(const Run& run, const Cfg& c, const std::string& key) {
    const auto& v = c.raw(key);
    if (v.is_string()) {
        const auto name = v.get<std::string>();
        if (name == "parabola") return parabola();
        if (name == "halfparabola") return half_parabola();
        c.fail(key, "unknown curve '" + name + "' (parabola, halfparabola or {\"table\": path})");
    }
    Cfg t = c.sub(key);
    const auto path = run.resolve(t.string("table"));
    return io::curve_from_json(path, io::read_json_file(path));
}

template <class W>
IFSSpec<W> ifs_from(const Cfg& c) {
    IFSSpec<W> spec;
    const auto& maps = c.raw("maps");
    if (!maps.is_array() || maps.empty()) c.fail("maps", "expected a nonempty list of {ratio, translation}");
    for (std::size_t i = 0; i < maps.size(); ++i) {
        Cfg m{maps[i], c.path + "/maps/" + std::to_string(i)};
        spec.maps.push_back(AffineMap{m.number("ratio"), m.number("translation")});
    }
    const auto& ws = c.raw("weights");
    if (!ws.is_array()) c.fail("weights", "expected a list");
    for (const auto& w : ws) spec.weights.push_back(io::parse_weight<W>(w));
    if (c.has("node_budget")) spec.node_budget = static_cast<std::size_t>(c.integer("node_budget"));
    return spec;
}

// Measure described by `key` of c; m_override replaces the scale of generated
// sources (sweeps over delta).
template <class W>
BasicDeltaMeasure<W> measure_from(const Run& run, const Cfg& parent, const std::string& key,
                                  std::optional<int> m_override = std::nullopt) {
    Cfg c = parent.sub(key);
    BasicDeltaMeasure<W> mu;
    if (c.has("file")) {
        mu = io::read_measure<W>(run.resolve(c.string("file")));
        if (m_override && mu.scale().log2_inverse() != *m_override)
            c.fail("file", "file measure has m = " + std::to_string(mu.scale().log2_inverse()) + ", sweep needs m = " +
                               std::to_string(*m_override));
    } else {
        const int m = m_override ? *m_override : c.integer("m");
        if (c.has("ifs")) {
            mu = from_ifs(ifs_from<W>(c.sub("ifs")), Scale(m, 1));
        } else {
            const auto name = c.string("builtin");
            if (name == "cantor4")
                mu = from_ifs(cantor4_spec<W>(), Scale(m, 1));
            else if (name == "lebesgue")
                mu = lebesgue_unit<W>(Scale(m, c.integer_or("dim", 1)));
            else if (name == "atom") {
                const int dim = c.integer_or("dim", 1);
                mu = atom_measure<W>(Scale(m, dim));
            } else
                c.fail("builtin", "unknown built-in '" + name + "' (cantor4, lebesgue, atom)");
        }
    }
    if (c.has("lift")) mu = lift_to_curve(mu, curve_from(run, c, "lift"));
    return mu;
}

json summary(const DeltaMeasure& mu) {
    return json{{"atoms", mu.size()},
                {"delta", mu.scale().delta()},
                {"diameter", mu.diameter()},
                {"dim", mu.dim()},
                {"m", mu.scale().log2_inverse()},
                {"mass", mu.total_mass()}};
}

template <class W>
json summary_of(const BasicDeltaMeasure<W>& mu) {
    json s = summary(to_double_measure(mu));
    if constexpr (weight_traits<W>::exact) s["mass_exact"] = format_rational(mu.total_mass());
    return s;
}

Window window_from(const Cfg& c, int dim) {
    if (!c.has("window")) return Window::everything(dim);
    Cfg w = c.sub("window");
    auto lo = w.numbers("lo"), hi = w.numbers("hi");
    if (static_cast<int>(lo.size()) != dim || static_cast<int>(hi.size()) != dim)
        c.fail("window", "lo and hi need one entry per dimension");
    Window win = Window::everything(dim);
    for (int i = 0; i < dim; ++i) {
        win.lo[static_cast<std::size_t>(i)] = lo[static_cast<std::size_t>(i)];
        win.hi[static_cast<std::size_t>(i)] = hi[static_cast<std::size_t>(i)];
    }
    win.validate();
    return win;
}

// ---------------------------------------------------------------------------
// Subcommands.

template <class W>
void cmd_generate(Run& run) {
    auto mu = measure_from<W>(run, run.root(), "measure");
    io::write_measure((run.out / "measure.json").string(), mu);
    const json s = summary_of(mu);
    std::cout << "scale 2^-" << mu.scale().log2_inverse() << " dim " << mu.dim() << "  atoms " << mu.size()
              << "  mass " << s.at("mass").get<double>() << "  diameter " << s.at("diameter").get<double>() << "\n";
    run.write_report(s);
}

template <class W>
void cmd_scan(Run& run) {
    const Cfg c = run.root();
    auto sigma = measure_from<W>(run, c, "measure");
    const auto Ds = c.numbers("D");
    PerfectnessQuery q;
    q.window = window_from(c, sigma.dim());
    if (c.has("r_min")) q.r_min = c.number("r_min");
    const auto centers = c.string_or("centers", "support");
    if (centers == "support")
        q.centers = centers_mode::support;
    else if (centers == "all_grid")
        q.centers = centers_mode::all_grid;
    else
        c.fail("centers", "expected support or all_grid");
    q.grid_ratio = c.number_or("grid_ratio", 9.0 / 8.0);
    const bool frostman = c.boolean_or("frostman", true);

    io::CsvWriter csv({"D", "best_beta", "witness_x", "witness_y", "witness_r", "witness_open", "tested", "admissible",
                       "diam", "r_min", "grid_ratio", "frostman_s", "frostman_C", "frostman_ok"});
    json rows = json::array();
    std::vector<std::pair<double, double>> betas;
    for (double D : Ds) {
        q.D = D;
        auto rep = scan_perfectness(sigma, q);
        json row{{"D", D},
                 {"best_beta", rep.best_beta},
                 {"tested", rep.tested_ball_count},
                 {"admissible", rep.admissible_ball_count},
                 {"diam", rep.diam_support},
                 {"r_min", rep.r_min},
                 {"grid_ratio", rep.grid_ratio}};
        std::string wx, wy, wr, wo;
        if (rep.witness) {
            row["witness"] = {{"center", {rep.witness->center[0], rep.witness->center[1]}},
                              {"radius", rep.witness->radius},
                              {"open", rep.witness->open}};
            wx = num(rep.witness->center[0]);
            wy = num(rep.witness->center[1]);
            wr = num(rep.witness->radius);
            wo = num(rep.witness->open);
        }
        std::string fs_s, fs_c, fs_ok;
        // Frostman chain: beta < 1 gives sigma(B(x, r)) <= C r^s with the derived s, C.
        if (frostman && rep.best_beta > 0.0 && rep.best_beta < 1.0) {
            const double s = frostman_exponent(D, rep.best_beta);
            const double C = frostman_constant(D, s, rep.diam_support);
            auto fr = frostman_check(sigma, s, C, D, q.r_min, q.grid_ratio);
            row["frostman"] = {{"s", s}, {"C", C}, {"ok", fr.ok}, {"worst_ratio", fr.worst_ratio}};
            run.check(fr.ok, "Frostman bound fails at D = " + num(D));
            fs_s = num(s);
            fs_c = num(C);
            fs_ok = num(fr.ok);
        }
        csv.row({num(D), num(rep.best_beta), wx, wy, wr, wo, num(rep.tested_ball_count),
                 num(rep.admissible_ball_count), num(rep.diam_support), num(rep.r_min), num(rep.grid_ratio), fs_s, fs_c,
                 fs_ok});
        rows.push_back(row);
        betas.emplace_back(D, rep.best_beta);
    }
    std::sort(betas.begin(), betas.end());
    for (std::size_t i = 1; i < betas.size(); ++i)
        run.check(betas[i].second <= betas[i - 1].second + 1e-12, "best_beta increases with D");
    run.write("scan.csv", csv.str());
    run.write_report(json{{"rows", rows}, {"measure", summary_of(sigma)}});
}

energy_method method_from(const Cfg& c, const std::string& key, const std::string& name) {
    if (name == "kernel") return energy_method::kernel;
    if (name == "mollified") return energy_method::mollified;
    if (name == "fourier") return energy_method::fourier;
    c.fail(key, "unknown energy method '" + name + "'");
}

void cmd_energy(Run& run) {
    const Cfg c = run.root();
    if (c.has("flattening")) {
        const Cfg f = c.sub("flattening");
        const double t = f.number("t");
        const auto ks = f.integers("k");
        const auto ms = c.integers("deltas");
        // sigma must be regenerated at each delta; flattening_iteration takes one
        // measure, so run it per scale.
        io::CsvWriter csv({"t", "delta", "k", "method", "energy", "kappa", "atoms"});
        json rows = json::array();
        std::map<double, std::vector<double>> kappa_by_delta;
        bool nonincreasing = true;
        for (int m : ms) {
            DeltaMeasure sigma;
            if (run.exact)
                sigma = to_double_measure(measure_from<Rational>(run, c, "measure", m));
            else
                sigma = measure_from<double>(run, c, "measure", m);
            auto prof = flattening_iteration(sigma, t, {sigma.scale()}, ks);
            nonincreasing = nonincreasing && prof.kappa_nonincreasing;
            for (const auto& r : prof.rows) {
                csv.row({num(t), num(r.delta), num(r.k), to_string(r.method), num(r.value), num(r.kappa),
                         num(r.atoms)});
                rows.push_back(json{{"delta", r.delta},
                                    {"k", r.k},
                                    {"energy", r.value},
                                    {"kappa", r.kappa},
                                    {"atoms", r.atoms}});
                run.check(r.value > 0.0, "nonpositive energy");
            }
        }
        run.write("flattening.csv", csv.str());
        run.write_report(json{{"rows", rows}, {"kappa_nonincreasing", nonincreasing}, {"t", t}});
        return;
    }

    const auto alphas = c.numbers("alpha");
    const auto ms = c.integers("deltas");
    std::vector<std::string> methods{"kernel"};
    if (c.has("methods")) {
        methods.clear();
        for (const auto& v : c.raw("methods")) methods.push_back(v.get<std::string>());
    }
    EnergyOptions opt;
    opt.h = c.number_or("h", 0.0);
    io::CsvWriter csv({"alpha", "delta", "method", "energy", "atoms"});
    json rows = json::array();
    for (int m : ms) {
        DeltaMeasure mu;
        if (run.exact)
            mu = to_double_measure(measure_from<Rational>(run, c, "measure", m));
        else
            mu = measure_from<double>(run, c, "measure", m);
        for (double a : alphas) {
            std::map<std::string, double> got;
            for (const auto& name : methods) {
                const double e = riesz_energy(mu, a, mu.scale().delta(), method_from(c, "methods", name), opt);
                got[name] = e;
                csv.row({num(a), num(mu.scale().delta()), name, num(e), num(mu.size())});
                rows.push_back(json{{"alpha", a}, {"delta", mu.scale().delta()}, {"method", name}, {"energy", e}});
                run.check(e > 0.0, "nonpositive energy");
            }
            if (got.count("kernel") && got.count("mollified")) {
                const double r = got["kernel"] / got["mollified"];
                run.check(r >= 0.25 && r <= 4.0, "kernel and mollified energies differ by more than a factor 4");
            }
        }
    }
    run.write("energy.csv", csv.str());
    run.write_report(json{{"rows", rows}});
}

void dump_spectrum(const Run& run, const FourierField& f) {
    // Interleaved (re, im) float64, little-endian, row-major over [-A, A]^d.
    std::string bytes;
    bytes.reserve(f.values.size() * 16);
    auto put = [&bytes](double v) {
        unsigned char b[8];
        std::uint64_t u;
        std::memcpy(&u, &v, 8);
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
        bytes.append(reinterpret_cast<const char*>(b), 8);
    };
    for (const auto& z : f.values) {
        put(z.real());
        put(z.imag());
    }
    run.write("spectrum.bin", bytes);
    json shape = json::array();
    for (int i = 0; i < f.dim; ++i) shape.push_back(f.width());
    shape.push_back(2);
    run.write("spectrum.json", io::dump_report(json{{"dtype", "float64"},
                                                    {"endianness", "little"},
                                                    {"order", "row-major"},
                                                    {"shape", shape},
                                                    {"h", f.h},
                                                    {"R", f.R},
                                                    {"A", f.A},
                                                    {"origin_offset", f.A},
                                                    {"channels", {"re", "im"}},
                                                    {"config_hash", io::fnv1a_hex(run.config.dump())}}));
}

void cmd_fourier(Run& run) {
    const Cfg c = run.root();
    DeltaMeasure sigma = run.exact ? to_double_measure(measure_from<Rational>(run, c, "measure"))
                                   : measure_from<double>(run, c, "measure");
    const auto ps = c.integers("p");
    const auto Rs = c.numbers("R");
    const double h = c.has("h") ? c.number("h") : default_frequency_spacing(sigma.diameter());
    auto tab = lp_ball_averages(sigma, ps, Rs, h);
    io::CsvWriter csv({"p", "R", "lp_avg", "points", "h"});
    json rows = json::array();
    for (std::size_t i = 0; i < tab.ps.size(); ++i)
        for (std::size_t r = 0; r < tab.Rs.size(); ++r) {
            csv.row({num(tab.ps[i]), num(tab.Rs[r]), num(tab.value[i][r]), num(tab.points[r]), num(h)});
            rows.push_back(json{{"p", tab.ps[i]}, {"R", tab.Rs[r]}, {"lp_avg", tab.value[i][r]}, {"points", tab.points[r]}});
        }
    json slopes = json::object();
    if (tab.Rs.size() >= 2)
        for (std::size_t i = 0; i < tab.ps.size(); ++i) slopes[std::to_string(tab.ps[i])] = tab.slope(i);

    // |sigma-hat| <= mass, so averages grow with R and, for mass <= 1, shrink with p.
    const double mass = sigma.total_mass();
    run.check(tab.sup_abs <= mass * (1 + 1e-9), "|sigma-hat| exceeds the total mass");
    for (std::size_t i = 0; i < tab.ps.size(); ++i)
        for (std::size_t r = 1; r < tab.Rs.size(); ++r)
            if (tab.Rs[r] >= tab.Rs[r - 1])
                run.check(tab.value[i][r] >= tab.value[i][r - 1] * (1 - 1e-12), "L^p average decreases in R");
    if (mass <= 1.0 + 1e-12)
        for (std::size_t i = 0; i < tab.ps.size(); ++i)
            for (std::size_t k = 0; k < tab.ps.size(); ++k)
                if (tab.ps[k] > tab.ps[i])
                    for (std::size_t r = 0; r < tab.Rs.size(); ++r)
                        run.check(tab.value[k][r] <= tab.value[i][r] * (1 + 1e-9), "L^p average increases in p");

    if (c.boolean_or("dump", false))
        dump_spectrum(run, fourier_eval(sigma, h, *std::max_element(Rs.begin(), Rs.end())));
    run.write("fourier.csv", csv.str());
    run.write_report(json{{"rows", rows}, {"slopes", slopes}, {"sup_abs", tab.sup_abs}, {"h", h}});
}

template <class W>
void cmd_convolve(Run& run) {
    const Cfg c = run.root();
    auto mu = measure_from<W>(run, c, "measure");
    BasicDeltaMeasure<W> out;
    W expected_mass;
    if (c.has("power")) {
        const int k = c.integer("power");
        out = self_convolution_power(mu, k);
        expected_mass = W(1);
        for (int i = 0; i < k; ++i) expected_mass *= mu.total_mass();
    } else {
        auto nu = measure_from<W>(run, c, "other");
        out = convolve(mu, nu);
        expected_mass = mu.total_mass() * nu.total_mass();
    }
    if constexpr (weight_traits<W>::exact)
        run.check(out.total_mass() == expected_mass, "convolution does not preserve mass");
    else
        run.check(std::abs(out.total_mass() - expected_mass) <= 1e-12 * std::max(1.0, expected_mass),
                  "convolution does not preserve mass");
    io::write_measure((run.out / "measure.json").string(), out);
    run.write_report(json{{"result", summary_of(out)}, {"l2sh_norm_sq", to_double(l2sh_norm_sq(out))}});
}

CellSet random_cells(const Cfg& c, int T, int m) {
    const int count = c.integer("count");
    const auto seed = static_cast<std::uint64_t>(c.integer("seed"));
    const int dim = c.integer_or("dim", 1);
    const Scale s(T * m, dim);
    const std::int64_t n = std::int64_t{1} << s.log2_inverse();
    const double total = dim == 1 ? static_cast<double>(n) : static_cast<double>(n) * static_cast<double>(n);
    if (count < 1 || count > total) c.fail("count", "must lie in [1, number of cells at scale 2^{-mT}]");
    std::mt19937_64 rng(seed);
    std::set<Index> cells;
    while (cells.size() < static_cast<std::size_t>(count)) {
        const auto i = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(n));
        const auto j = dim == 2 ? static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(n)) : 0;
        cells.insert(Index{i, j});
    }
    return CellSet(s, std::vector<Index>(cells.begin(), cells.end()));
}

void cmd_uniformize(Run& run) {
    const Cfg c = run.root();
    const int T = c.integer("T"), m = c.integer("m");
    const double eps = c.number("epsilon");
    CellSet P;
    if (c.has("random")) {
        P = random_cells(c.sub("random"), T, m);
    } else {
        auto mu = measure_from<double>(run, c, "measure");
        P = mu.support_cells();
    }
    auto res = extract_uniform(P, T, m, eps, c.integer_or("round_cap", 256));

    // Records and remainder must partition the input.
    std::vector<Index> all(res.remainder.begin(), res.remainder.end());
    for (const auto& r : res.records) all.insert(all.end(), r.cells.begin(), r.cells.end());
    std::sort(all.begin(), all.end());
    const bool disjoint = std::adjacent_find(all.begin(), all.end()) == all.end();
    run.check(disjoint && all.size() == P.size() && CellSet(P.scale(), all) == P,
              "records and remainder do not partition the input");
    for (const auto& r : res.records) run.check(verify_uniform(r.cells, T, m).uniform, "record is not uniform");

    io::CsvWriter csv({"record", "size", "branching", "meets_threshold"});
    json recs = json::array();
    for (std::size_t i = 0; i < res.records.size(); ++i) {
        const auto& r = res.records[i];
        std::string br;
        for (std::size_t k = 0; k < r.branching.size(); ++k) br += (k ? " " : "") + std::to_string(r.branching[k]);
        csv.row({num(i), num(r.cells.size()), br,
                 num(static_cast<double>(r.cells.size()) >= res.record_threshold)});
        json cells = json::array();
        for (const auto& x : r.cells) {
            if (P.dim() == 1)
                cells.push_back(x[0]);
            else
                cells.push_back({x[0], x[1]});
        }
        recs.push_back(json{{"branching", r.branching}, {"cells", cells}});
    }
    run.write("uniformize.csv", csv.str());
    run.write("records.json", io::dump_report(json{{"T", T}, {"m", m}, {"dim", P.dim()}, {"records", recs}}));
    run.write_report(json{{"input_size", res.input_size},
                          {"records", res.records.size()},
                          {"remainder", res.remainder.size()},
                          {"target_remainder", res.target_remainder},
                          {"remainder_ok", res.remainder_ok},
                          {"record_threshold", res.record_threshold},
                          {"records_meeting_threshold", res.records_meeting_threshold},
                          {"rounds", res.rounds},
                          {"partial", res.partial}});
}

// ---------------------------------------------------------------------------
// Experiments.

DeltaMeasure double_measure(const Run& run, const Cfg& c, const std::string& key,
                            std::optional<int> m = std::nullopt) {
    if (run.exact) return to_double_measure(measure_from<Rational>(run, c, key, m));
    return measure_from<double>(run, c, key, m);
}

void exp_capture(Run& run, const Cfg& c) {
    const double alpha = c.number("alpha"), eps = c.number("epsilon"), D = c.number("D");
    auto make = [&](const Scale& s) {
        return std::pair{double_measure(run, c, "mu", s.log2_inverse()),
                         double_measure(run, c, "sigma", s.log2_inverse())};
    };
    const int dim = double_measure(run, c, "mu", c.integers("deltas").front()).dim();
    auto tab = capture_counting_experiment(make, alpha, eps, D, scales_from(c, "deltas", dim));
    io::CsvWriter csv({"delta", "captured", "threshold", "pass", "mu_energy", "mu_hypothesis", "sigma_beta",
                       "sigma_hypothesis"});
    json rows = json::array();
    for (const auto& r : tab.rows) {
        csv.row({num(r.delta), num(r.captured), num(r.threshold), num(r.pass), num(r.mu_energy), num(r.mu_hypothesis),
                 num(r.sigma_beta), num(r.sigma_hypothesis)});
        rows.push_back(json{{"delta", r.delta},
                            {"captured", r.captured},
                            {"threshold", r.threshold},
                            {"pass", r.pass},
                            {"mu_energy", r.mu_energy},
                            {"mu_hypothesis", r.mu_hypothesis},
                            {"sigma_beta", r.sigma_beta},
                            {"sigma_hypothesis", r.sigma_hypothesis}});
        // The counting bound is only claimed when sigma satisfies its hypothesis.
        if (r.sigma_hypothesis) run.check(r.pass, "capture bound fails at delta = " + num(r.delta));
    }
    run.write("capture.csv", csv.str());
    run.write_report(json{{"rows", rows}, {"all_pass", tab.all_pass}, {"fitted_exponent", tab.fitted_exponent}});
}

void exp_bridge(Run& run, const Cfg& c) {
    auto sigma = double_measure(run, c, "measure");
    const int p = c.integer("p");
    const double u = c.has("u") ? c.number("u") : 2.0 - c.number("epsilon") / 2.0;
    const double bound = c.number_or("ratio_bound", 32.0);
    auto reps = fourier_energy_bridge(sigma, p, c.numbers("R"), u, c.number_or("h", 0.0));
    io::CsvWriter csv({"p", "R", "u", "lhs", "energy", "rhs", "ratio"});
    json rows = json::array();
    for (const auto& b : reps) {
        csv.row({num(b.p), num(b.R), num(b.u), num(b.lhs), num(b.energy), num(b.rhs), num(b.ratio)});
        rows.push_back(json{{"R", b.R}, {"lhs", b.lhs}, {"energy", b.energy}, {"rhs", b.rhs}, {"ratio", b.ratio}});
        run.check(b.ratio > 0.0 && b.ratio <= bound, "bridge ratio outside (0, bound] at R = " + num(b.R));
    }
    run.write("bridge.csv", csv.str());
    run.write_report(json{{"rows", rows}, {"u", u}, {"ratio_bound", bound}});
}

void exp_j_sequence(Run& run, const Cfg& c) {
    auto mu = double_measure(run, c, "mu");
    auto sigma = double_measure(run, c, "sigma");
    auto js = j_sequence(mu, sigma, c.number("r"), c.integer("k_max"));
    io::CsvWriter csv({"k", "J"});
    for (std::size_t k = 0; k < js.J.size(); ++k) csv.row({num(k), num(js.J[k])});
    run.check(js.nonincreasing, "J_r(k) increases in k");
    run.write("j_sequence.csv", csv.str());
    run.write_report(json{{"J", js.J}, {"r", js.r}, {"grid", js.grid}, {"nonincreasing", js.nonincreasing}});
}

void exp_sumset_growth(Run& run, const Cfg& c) {
    const int T = c.integer("T"), m = c.integer("m");
    auto sigma = double_measure(run, c, "sigma", T * m);
    // X: the first uniform record extracted from the support of the given measure.
    auto x_src = double_measure(run, c, "X", T * m);
    auto ext = extract_uniform(x_src.support_cells(), T, m, c.number("epsilon"), 1);
    const auto sel_name = c.string("selection");
    pair_selection sel = pair_selection::all_pairs;
    if (sel_name == "top_mass")
        sel = pair_selection::top_mass;
    else if (sel_name != "all_pairs")
        c.fail("selection", "expected all_pairs or top_mass");
    auto rep = sumset_growth_experiment(ext.records.front(), sigma, sel, c.number_or("fraction", 1.0),
                                        c.number("alpha"), c.number("epsilon"));
    io::CsvWriter csv({"x_size", "pairs", "pair_mass", "sumset_size", "growth_ratio", "threshold", "exceeds_threshold",
                       "max_fiber", "local_size", "local_bound", "local_hypothesis"});
    csv.row({num(rep.x_size), num(rep.pairs), num(rep.pair_mass), num(rep.sumset_size), num(rep.growth_ratio),
             num(rep.threshold), num(rep.exceeds_threshold), num(rep.max_fiber), num(rep.local_size),
             num(rep.local_bound), num(rep.local_hypothesis)});
    run.write("sumset_growth.csv", csv.str());
    run.write_report(json{{"x_size", rep.x_size},
                          {"pairs", rep.pairs},
                          {"pair_mass", rep.pair_mass},
                          {"sumset_size", rep.sumset_size},
                          {"growth_ratio", rep.growth_ratio},
                          {"threshold", rep.threshold},
                          {"exceeds_threshold", rep.exceeds_threshold},
                          {"local_size", rep.local_size},
                          {"local_bound", rep.local_bound},
                          {"local_hypothesis", rep.local_hypothesis}});
}

void exp_row_structure(Run& run, const Cfg& c) {
    auto sigma = double_measure(run, c, "measure");
    if (sigma.dim() != 2) c.fail("measure", "row structure needs a planar measure");
    const int m = sigma.scale().log2_inverse();
    const auto sq = c.integers("square");  // Delta-cell index of Q
    if (sq.size() != 2) c.fail("square", "expected [i, j]");
    const int shift = m / 2;
    std::vector<Index> in;
    for (const auto& a : sigma.atoms()) {
        const Index q = coarsen_index(a.index, shift);
        if (q[0] == sq[0] && q[1] == sq[1]) in.push_back(a.index);
    }
    if (in.empty()) c.fail("square", "the square holds no support cell");
    const double alpha = c.number("alpha");
    const double eta = c.number_or("eta", default_eta(alpha));
    auto frame = tangent_projection(curve_from(run, c, "curve"), c.number("anchor"));
    auto rs = row_structure(CellSet(sigma.scale(), in), frame, eta);
    io::CsvWriter csv({"count", "rectangles"});
    json hist = json::object();
    for (const auto& [k, v] : rs.histogram) {
        csv.row({num(k), num(v)});
        hist[std::to_string(k)] = v;
    }
    run.check(rs.total == in.size(), "row structure lost cells");
    run.write("row_structure.csv", csv.str());
    run.write_report(json{{"Delta", rs.Delta},
                          {"eta", rs.eta},
                          {"full_threshold", rs.full_threshold},
                          {"histogram", hist},
                          {"rectangles", rs.rectangles},
                          {"full_rows", rs.full_rows},
                          {"total", rs.total}});
}

template <class W>
void exp_l2_lower_bound(Run& run, const Cfg& c) {
    const int n = c.integer("instances");
    const int m = c.integer("m");
    std::mt19937_64 rng(static_cast<std::uint64_t>(c.integer("seed")));
    const Scale s(m, 1);
    const auto cells = std::uint64_t{1} << m;
    io::CsvWriter csv({"instance", "c", "C", "lhs", "rhs", "ok"});
    std::size_t fails = 0;
    for (int t = 0; t < n; ++t) {
        std::set<std::int64_t> xs, ys;
        const auto nx = 1 + rng() % 24, ny = 1 + rng() % 24;
        while (xs.size() < nx) xs.insert(static_cast<std::int64_t>(rng() % cells));
        while (ys.size() < ny) ys.insert(static_cast<std::int64_t>(rng() % cells));
        std::vector<Index> xv;
        for (auto x : xs) xv.push_back({x, 0});
        auto mu = uniform_on<W>(CellSet(s, xv));
        std::vector<typename BasicDeltaMeasure<W>::Atom> sa;
        W total(0);
        std::vector<W> raw;
        for (std::size_t i = 0; i < ys.size(); ++i) raw.push_back(W(static_cast<long long>(1 + rng() % 8)));
        for (const auto& w : raw) total += w;
        std::size_t i = 0;
        for (auto y : ys) sa.push_back({Index{y, 0}, raw[i++] / total});
        auto sigma = BasicDeltaMeasure<W>::from_atoms(s, sa);
        std::vector<std::pair<Index, Index>> G;
        for (auto x : xs)
            for (auto y : ys)
                if (rng() % 3) G.push_back({Index{x, 0}, Index{y, 0}});
        if (G.empty()) G.push_back({Index{*xs.begin(), 0}, Index{*ys.begin(), 0}});
        auto rep = l2_lower_bound_check(mu, sigma, G);
        csv.row({num(t), num(rep.c), num(rep.C), num(rep.lhs), num(rep.rhs), num(rep.ok)});
        if (!rep.ok) ++fails;
    }
    run.check(fails == 0, std::to_string(fails) + " instances violate the L2 lower bound");
    run.write("l2_lower_bound.csv", csv.str());
    run.write_report(json{{"instances", n}, {"failures", fails}});
}

void exp_transversality(Run& run, const Cfg& c) {
    const int n = c.integer("instances");
    const int m = c.integer("m");
    const double CT = c.number_or("constant", default_transversality_constant);
    std::mt19937_64 rng(static_cast<std::uint64_t>(c.integer("seed")));
    std::uniform_real_distribution<double> ang(0.0, std::numbers::pi);
    const Scale s(m, 2);
    const double d = s.delta();
    io::CsvWriter csv({"instance", "alpha", "n1", "n2", "cells", "ratio", "ok"});
    std::size_t fails = 0;
    for (int t = 0; t < n; ++t) {
        Direction e1(ang(rng)), e2(ang(rng));
        while (projection_distance(e1, e2) < 4 * d) e2 = Direction(ang(rng));
        // Y: cells meeting the intersection of two random tubes of width delta.
        const double c1 = std::uniform_real_distribution<double>(0.3, 0.7)(rng);
        const double c2 = std::uniform_real_distribution<double>(0.3, 0.7)(rng);
        const Point n1{-e1.unit()[1], e1.unit()[0]}, n2{-e2.unit()[1], e2.unit()[0]};
        std::vector<Index> y;
        const std::int64_t N = std::int64_t{1} << m;
        for (std::int64_t i = 0; i < N; ++i)
            for (std::int64_t j = 0; j < N; ++j) {
                const Point p{(i + 0.5) * d, (j + 0.5) * d};
                if (std::abs(p[0] * n1[0] + p[1] * n1[1] - c1) <= d && std::abs(p[0] * n2[0] + p[1] * n2[1] - c2) <= d)
                    y.push_back({i, j});
            }
        auto rep = transversality_check(CellSet(s, y), e1, e2, CT);
        csv.row({num(t), num(rep.alpha), num(rep.n1), num(rep.n2), num(rep.cells), num(rep.ratio), num(rep.bound_ok)});
        if (!rep.bound_ok) ++fails;
    }
    run.check(fails == 0, std::to_string(fails) + " instances exceed the transversality bound");
    run.write("transversality.csv", csv.str());
    run.write_report(json{{"instances", n}, {"failures", fails}, {"constant", CT}});
}

void exp_curve_cover(Run& run, const Cfg& c) {
    auto sigma = double_measure(run, c, "measure");
    const auto curve = curve_from(run, c, "curve");
    const double cc = c.number_or("c", flatness_constant(curve));
    const double D = c.number("D");
    const int mD = c.integer("Delta_m");
    auto cov = curve_cover(sigma, Scale(mD, 2), D, cc);
    run.check(cov.max_overlap <= cover_overlap_bound, "cover overlap exceeds 9");
    run.check(cov.uncovered == 0, "cover misses support atoms");
    run.check(cov.diameter_violations == 0, "cover ball with small support diameter");
    io::CsvWriter csv({"x", "y", "atom", "diam_in_support"});
    for (const auto& b : cov.balls) csv.row({num(b.center[0]), num(b.center[1]), num(b.atom), num(b.diam_in_support)});
    run.write("cover.csv", csv.str());
    run.write_report(json{{"balls", cov.balls.size()},
                          {"c", cov.c},
                          {"A", c.number_or("A", default_A(cc))},
                          {"Delta", cov.Delta},
                          {"radius", cov.radius},
                          {"max_overlap", cov.max_overlap},
                          {"uncovered", cov.uncovered},
                          {"diameter_violations", cov.diameter_violations}});
}

void cmd_experiment(Run& run) {
    const Cfg c = run.root();
    const auto kind = c.string("kind");
    if (kind == "capture_counting")
        exp_capture(run, c);
    else if (kind == "bridge")
        exp_bridge(run, c);
    else if (kind == "j_sequence")
        exp_j_sequence(run, c);
    else if (kind == "sumset_growth")
        exp_sumset_growth(run, c);
    else if (kind == "row_structure")
        exp_row_structure(run, c);
    else if (kind == "l2_lower_bound")
        run.exact ? exp_l2_lower_bound<Rational>(run, c) : exp_l2_lower_bound<double>(run, c);
    else if (kind == "transversality")
        exp_transversality(run, c);
    else if (kind == "curve_cover")
        exp_curve_cover(run, c);
    else
        c.fail("kind", "unknown experiment '" + kind +
                           "' (capture_counting, bridge, j_sequence, sumset_growth, row_structure, l2_lower_bound, "
                           "transversality, curve_cover)");
}

int exit_code(error_kind k) {
    switch (k) {
        case error_kind::validation: return 2;
        case error_kind::budget: return 3;
        case error_kind::property: return 4;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"flatlab: dyadic measures, perfectness scans, energies and Fourier flattening experiments"};
    app.set_version_flag("--version", std::string(version_string));
    std::string config_path, out_dir = ".";
    int threads = 0;
    bool exact = false;
    app.add_option("--config", config_path, "JSON config for the run")->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--threads", threads, "worker threads (default: FLATLAB_THREADS, then all cores)");
    app.add_flag("--exact", exact, "exact rational weights where supported");
    app.require_subcommand(1);
    const std::vector<std::pair<std::string, std::string>> cmds{
        {"generate", "build a measure and write it as a measure file"},
        {"scan", "uniform perfectness scan over a list of D"},
        {"energy", "Riesz energies, or the flattening table of self-convolutions"},
        {"fourier", "L^p ball averages of the Fourier transform"},
        {"convolve", "convolution of two measures, or a convolution power"},
        {"uniformize", "extract exactly uniform subsets of a cell set"},
        {"experiment", "run a named experiment"}};
    for (const auto& [name, help] : cmds) app.add_subcommand(name, help)->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        if (config_path.empty()) throw validation_error("--config is required");
        if (threads > 0) set_thread_count(threads);
        Run run;
        run.command = command;
        run.base = fs::path(config_path).parent_path();
        run.config = io::read_json_file(config_path);
        if (!run.config.is_object()) throw validation_error("config: top level must be an object");
        run.exact = exact || Cfg{run.config, ""}.boolean_or("exact", false);
        run.out = out_dir;
        fs::create_directories(run.out);

        if (command == "generate")
            run.exact ? cmd_generate<Rational>(run) : cmd_generate<double>(run);
        else if (command == "scan")
            run.exact ? cmd_scan<Rational>(run) : cmd_scan<double>(run);
        else if (command == "energy")
            cmd_energy(run);
        else if (command == "fourier")
            cmd_fourier(run);
        else if (command == "convolve")
            run.exact ? cmd_convolve<Rational>(run) : cmd_convolve<double>(run);
        else if (command == "uniformize")
            cmd_uniformize(run);
        else
            cmd_experiment(run);

        for (const auto& f : run.failures) std::cerr << "property check failed: " << f << "\n";
        return run.failures.empty() ? 0 : 4;
    } catch (const flatlab::error& e) {
        std::cerr << "flatlab " << command << ": " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const json::exception& e) {
        std::cerr << "flatlab " << command << ": config: " << e.what() << "\n";
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "flatlab " << command << ": " << e.what() << "\n";
        return 2;
    }
}
