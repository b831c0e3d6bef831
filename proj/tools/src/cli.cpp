#include "lddm_cli/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "lddm/experiment.hpp"
#include "lddm/flows.hpp"
#include "lddm/io.hpp"
#include "lddm/matching.hpp"
#include "lddm/phantom.hpp"
#include "lddm/pulsons.hpp"

namespace fs = std::filesystem;

namespace lddm::cli {

namespace {

// A computed result failed a post-condition check.
class ValidationFailed : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string indexed(const std::string &prefix, const std::string &tag, int k) {
    return prefix + "_" + tag + "_" + std::to_string(k) + ".field";
}

std::string fmt(double v) { return io::format_double(v); }

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_number(std::string_view text) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) {
        text.remove_prefix(1);
    }
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
        text.remove_suffix(1);
    }
    if (!text.empty() && text.front() == '+') {
        text.remove_prefix(1);
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw Error(ErrorKind::bad_value, "not a number: '" + std::string(text) + "'");
    }
    return value;
}

std::vector<double> parse_list(const std::string &text) {
    std::vector<double> values;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t end = text.find(',', start);
        const std::size_t stop = end == std::string::npos ? text.size() : end;
        values.push_back(parse_number(std::string_view(text).substr(start, stop - start)));
        if (end == std::string::npos) {
            break;
        }
        start = end + 1;
    }
    return values;
}

// ---- register -------------------------------------------------------------

struct RegisterArgs {
    std::string source, target, config, out_prefix;
};

std::string cmd_register(const RegisterArgs &a) {
    // Everything is read before anything is written.
    const Image source = io::read_pgm(a.source);
    const Image target = io::read_pgm(a.target);
    const MatchConfig cfg = io::read_config(a.config);
    const MatchResult r = register_images(source, target, cfg);

    const std::string &pre = a.out_prefix;
    io::write_pgm(pre + "_warped.pgm", r.warped);
    io::write_field(pre + "_phi.field", r.phi_right.final().disp);
    io::write_field(pre + "_phi_inv.field", r.phi_inv.disp);
    io::write_field(pre + "_dispx.field", displacement_x(r));

    std::string trace = "iteration,energy,ssd,objective\n";
    for (std::size_t i = 0; i < r.objective_trace.size(); ++i) {
        trace += std::to_string(i) + "," + fmt(r.energy_trace[i]) + "," + fmt(r.ssd_trace[i]) + "," +
                 fmt(r.objective_trace[i]) + "\n";
    }
    io::write_file(pre + "_trace.csv", trace);

    for (int k = 0; k <= r.phi_right.steps(); ++k) {
        io::write_field(indexed(pre, "path", k), r.phi_right.snapshots[static_cast<std::size_t>(k)].disp);
    }
    for (int k = 0; k < r.velocity.size(); ++k) {
        io::write_field(indexed(pre, "mom", k), r.momenta[static_cast<std::size_t>(k)]);
        io::write_field(indexed(pre, "vel", k), r.velocity.steps[static_cast<std::size_t>(k)]);
    }

    const double ssd0 = r.ssd_trace.front();
    const double reduction = ssd0 > 0.0 ? 1.0 - r.final_ssd / ssd0 : 0.0;
    return "register: accepted=" + std::to_string(r.objective_trace.size() - 1) +
           " trials=" + std::to_string(r.iterations) + " stop=" + r.stop_reason + " ssd=" + fmt(r.final_ssd) +
           " energy=" + fmt(r.final_energy) + " ssd_reduction=" + fmt(reduction);
}

// ---- warp / invert --------------------------------------------------------

struct WarpArgs {
    std::string image, phi_inv, out;
};

std::string cmd_warp(const WarpArgs &a) {
    const Image img = io::read_pgm(a.image);
    const Deformation phi_inv(io::read_field(a.phi_inv));
    require_same_grid(img.grid(), phi_inv.grid(), "warp");
    io::write_pgm(a.out, warp_image(img, phi_inv));
    return "warp: " + std::to_string(img.grid().width()) + "x" + std::to_string(img.grid().height());
}

struct InvertArgs {
    std::string phi, out;
    int max_iter = 500;
    double tol_px = 1e-9;
};

std::string cmd_invert(const InvertArgs &a) {
    const Deformation phi(io::read_field(a.phi));
    const InversionResult inv = invert_detailed(phi, a.max_iter, a.tol_px);
    const Deformation round_trip = compose(phi, inv.inverse);
    const double residual = max_difference_px(round_trip, Deformation::identity(phi.grid()), 1);
    io::write_field(a.out, inv.inverse.disp);
    return "invert: iterations=" + std::to_string(inv.iterations) + " last_update_px=" + fmt(inv.last_update_px) +
           " interior_residual_px=" + fmt(residual);
}

// ---- correspond -----------------------------------------------------------

struct CorrespondArgs {
    std::string path_prefix, out_prefix;
};

std::string cmd_correspond(const CorrespondArgs &a) {
    DeformationPath phi;
    for (int k = 0; fs::exists(indexed(a.path_prefix, "path", k)); ++k) {
        phi.snapshots.emplace_back(io::read_field(indexed(a.path_prefix, "path", k)));
    }
    if (phi.snapshots.size() < 2) {
        throw Error(ErrorKind::io, "correspond: need snapshots " + indexed(a.path_prefix, "path", 0) + " and " +
                                       indexed(a.path_prefix, "path", 1));
    }
    for (const auto &s : phi.snapshots) {
        require_same_grid(phi.grid(), s.grid(), "correspond");
    }
    const int n = phi.steps();

    // Momenta and velocities are optional, but all-or-nothing.
    std::vector<VectorField> momenta, velocities;
    for (int k = 0; k < n; ++k) {
        const bool has_m = fs::exists(indexed(a.path_prefix, "mom", k));
        const bool has_v = fs::exists(indexed(a.path_prefix, "vel", k));
        if (has_m && has_v) {
            momenta.push_back(io::read_field(indexed(a.path_prefix, "mom", k)));
            velocities.push_back(io::read_field(indexed(a.path_prefix, "vel", k)));
        } else if (has_m || has_v || !momenta.empty()) {
            throw Error(ErrorKind::io, "correspond: missing momentum/velocity file for step " + std::to_string(k));
        }
    }

    const DeformationPath psi = correspond_left_right(phi);
    const double endpoint_px = max_difference_px(psi.final(), phi.final());
    if (!(endpoint_px < 0.1)) {
        throw ValidationFailed("correspond: endpoints differ by " + fmt(endpoint_px) + " px");
    }

    std::string csv = "row,right,left\n";
    std::string energy_note = " energies=unavailable";
    if (!momenta.empty()) {
        const std::vector<double> right = step_energies(momenta, velocities);
        const std::vector<VectorField> mom_rev(momenta.rbegin(), momenta.rend());
        const std::vector<VectorField> vel_rev(velocities.rbegin(), velocities.rend());
        const std::vector<double> left = step_energies(mom_rev, vel_rev);
        for (int k = 0; k < n; ++k) {
            csv += "step_" + std::to_string(k) + "," + fmt(right[static_cast<std::size_t>(k)]) + "," +
                   fmt(left[static_cast<std::size_t>(k)]) + "\n";
        }
        const double total_right = sorted_sum(right);
        const double total_left = sorted_sum(left);
        csv += "total," + fmt(total_right) + "," + fmt(total_left) + "\n";
        if (total_right != total_left) {
            throw ValidationFailed("correspond: total energies differ");
        }
        energy_note = " energy=" + fmt(total_right) + " energies_equal=yes";
    }
    csv += "endpoint_max_abs_px,0," + fmt(endpoint_px) + "\n";

    for (int k = 0; k <= n; ++k) {
        io::write_field(indexed(a.out_prefix, "psi", k), psi.snapshots[static_cast<std::size_t>(k)].disp);
    }
    io::write_file(a.out_prefix + "_energies.csv", csv);
    return "correspond: steps=" + std::to_string(n) + energy_note + " endpoint_px=" + fmt(endpoint_px);
}

// ---- shoot ----------------------------------------------------------------

struct ShootArgs {
    int n = 0;
    std::string q, p, state_file, side = "right", out;
    double duration = 1.0;
    int steps = 100;
    double sigma = 1.0;
};

pulsons::State read_state_file(const std::string &path) {
    std::istringstream lines(io::read_file(path));
    pulsons::State s;
    std::string line;
    while (std::getline(lines, line)) {
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        if (line.find_first_not_of(" \t\r") == std::string::npos || line.rfind("Qx", 0) == 0) {
            continue;
        }
        const std::vector<double> v = parse_list(line);
        if (v.size() != 4) {
            throw Error(ErrorKind::malformed_header, "state file: expected 'Qx,Qy,Px,Py' per line");
        }
        s.q.push_back({v[0], v[1]});
        s.p.push_back({v[2], v[3]});
    }
    return s;
}

std::string cmd_shoot(const ShootArgs &a) {
    pulsons::State s;
    if (!a.state_file.empty()) {
        if (!a.q.empty() || !a.p.empty()) {
            throw Error(ErrorKind::invalid_argument, "shoot: give either --state-file or --q/--p");
        }
        s = read_state_file(a.state_file);
    } else {
        const std::vector<double> q = parse_list(a.q);
        const std::vector<double> p = parse_list(a.p);
        if (q.size() % 2 != 0 || p.size() != q.size()) {
            throw Error(ErrorKind::invalid_argument, "shoot: --q and --p need the same even number of values");
        }
        for (std::size_t i = 0; i < q.size(); i += 2) {
            s.q.push_back({q[i], q[i + 1]});
            s.p.push_back({p[i], p[i + 1]});
        }
    }
    if (a.n > 0 && static_cast<std::size_t>(a.n) != s.size()) {
        throw Error(ErrorKind::invalid_argument, "shoot: --n does not match the number of pulsons given");
    }
    pulsons::validate(s);
    if (a.side != "left" && a.side != "right") {
        throw Error(ErrorKind::invalid_argument, "shoot: --side must be left or right");
    }
    const pulsons::GaussianScalarKernel k(a.sigma);
    const auto traj = pulsons::shoot(s, k, a.side == "left" ? pulsons::Side::left : pulsons::Side::right,
                                     a.duration, a.steps);

    std::string csv = "t,a,Qx,Qy,Px,Py,H\n";
    const double h0 = pulsons::hamiltonian(traj.front(), k);
    double drift = 0.0;
    for (std::size_t step = 0; step < traj.size(); ++step) {
        const double t = a.duration * static_cast<double>(step) / a.steps;
        const double h = pulsons::hamiltonian(traj[step], k);
        // Relative to H0 unless the state carries no energy at all.
        drift = std::max(drift, h0 != 0.0 ? std::abs(h - h0) / std::abs(h0) : std::abs(h - h0));
        for (std::size_t i = 0; i < traj[step].size(); ++i) {
            const auto &st = traj[step];
            csv += fmt17(t) + "," + std::to_string(i) + "," + fmt17(st.q[i].x) + "," + fmt17(st.q[i].y) + "," +
                   fmt17(st.p[i].x) + "," + fmt17(st.p[i].y) + "," + fmt17(h) + "\n";
        }
    }
    io::write_file(a.out, csv);
    const double h1 = pulsons::hamiltonian(traj.back(), k);
    return "shoot: pulsons=" + std::to_string(s.size()) + " side=" + a.side + " H0=" + fmt17(h0) +
           " H1=" + fmt17(h1) + " drift=" + fmt17(drift);
}

// ---- kernel-apply ---------------------------------------------------------

struct KernelApplyArgs {
    std::string config, momentum, out;
};

std::string cmd_kernel_apply(const KernelApplyArgs &a) {
    const MatchConfig cfg = io::read_config(a.config);
    const VectorField p = io::read_field(a.momentum);
    const VectorField v = apply_kernel(cfg.kernel, p);
    const double norm = vnorm_sq(cfg.kernel, p);
    io::write_field(a.out, v);
    return "kernel-apply: norm_sq=" + fmt(norm) + " max_abs_v=" + fmt(max_abs(v));
}

// ---- phantom --------------------------------------------------------------

struct PhantomArgs {
    std::string out_prefix;
    int size = 128;
    bool lesion = false;
    std::uint64_t seed = 1;
};

std::string cmd_phantom(const PhantomArgs &a) {
    const Phantom ph = make_phantom({a.size, a.lesion, a.seed});
    io::write_pgm(a.out_prefix + "_source.pgm", ph.source);
    io::write_pgm(a.out_prefix + "_target.pgm", ph.target);
    io::write_pgm(a.out_prefix + "_lesion.pgm", ph.lesion.to_image());
    io::write_pgm(a.out_prefix + "_lesion_dilated.pgm", ph.lesion_dilated.to_image());
    return "phantom: size=" + std::to_string(a.size) + " seed=" + std::to_string(a.seed) +
           " lesion_pixels=" + std::to_string(ph.lesion.count()) +
           " dilated_pixels=" + std::to_string(ph.lesion_dilated.count());
}

// ---- experiment-lesion ----------------------------------------------------

struct ExperimentArgs {
    std::string out_dir;
    int size = 128;
    std::uint64_t seed = 1;
};

bool non_increasing(const std::vector<double> &trace) {
    return std::adjacent_find(trace.begin(), trace.end(), [](double x, double y) { return y > x; }) == trace.end();
}

std::string cmd_experiment(const ExperimentArgs &a) {
    LesionExperimentOptions opts;
    opts.size = a.size;
    opts.seed = a.seed;
    const LesionExperimentReport rep = run_lesion_experiment(opts);

    const fs::path dir(a.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw Error(ErrorKind::io, "cannot create '" + a.out_dir + "': " + ec.message());
    }
    io::write_pgm(dir / "source.pgm", rep.phantom.source);
    io::write_pgm(dir / "source_clean.pgm", rep.phantom.source_clean);
    io::write_pgm(dir / "target.pgm", rep.phantom.target);
    io::write_pgm(dir / "lesion.pgm", rep.phantom.lesion.to_image());
    io::write_pgm(dir / "lesion_dilated.pgm", rep.phantom.lesion_dilated.to_image());

    const auto emit = [&](const StrategyOutcome &o, const std::string &name) {
        io::write_pgm(dir / (name + "_warped.pgm"), o.result.warped);
        io::write_field(dir / (name + "_dispx.field"), displacement_x(o.result));
        std::string trace = "iteration,energy,ssd,objective\n";
        for (std::size_t i = 0; i < o.result.objective_trace.size(); ++i) {
            trace += std::to_string(i) + "," + fmt(o.result.energy_trace[i]) + "," + fmt(o.result.ssd_trace[i]) +
                     "," + fmt(o.result.objective_trace[i]) + "\n";
        }
        io::write_file(dir / (name + "_trace.csv"), trace);
    };
    emit(rep.reference, "reference");
    double symmetry_defect = 0.0;
    bool monotone = non_increasing(rep.reference.result.objective_trace);
    for (const auto &o : rep.strategies) {
        emit(o, o.strategy == "strategy1" ? o.strategy : o.strategy + "_c" + fmt(o.c));
        symmetry_defect = std::max(symmetry_defect, o.symmetry_defect);
        monotone = monotone && non_increasing(o.result.objective_trace);
    }
    io::write_file(dir / "report.csv", report_csv(rep));

    if (!monotone) {
        throw ValidationFailed("experiment-lesion: an objective trace increased");
    }
    if (symmetry_defect > 1e-12) {
        throw ValidationFailed("experiment-lesion: c=1 large-scale velocity not reflection invariant (" +
                               fmt(symmetry_defect) + ")");
    }
    return "experiment-lesion: size=" + std::to_string(a.size) + " strategy1_smallest=" +
           (rep.strategy1_smallest_in_lesion ? "yes" : "no") + " c0.5_closest=" + rep.half_symmetry_flag +
           " c1_symmetry_defect=" + fmt(symmetry_defect);
}

} // namespace

int exit_code_for(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::io:
        return io_error;
    case ErrorKind::bad_magic:
    case ErrorKind::malformed_header:
    case ErrorKind::header_mismatch:
    case ErrorKind::truncated_payload:
        return format_error;
    case ErrorKind::unknown_key:
    case ErrorKind::bad_value:
    case ErrorKind::missing_kernel:
        return config_error;
    case ErrorKind::non_convergent:
    case ErrorKind::not_psd:
    case ErrorKind::degenerate_partition:
    case ErrorKind::residual_too_large:
    case ErrorKind::missing_momenta:
    case ErrorKind::non_finite:
        return numerical_error;
    case ErrorKind::grid_mismatch:
    case ErrorKind::invalid_argument:
        return validation_error;
    }
    return validation_error;
}

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    CLI::App app{"Large deformation diffeomorphic matching with left- and right-invariant metrics", "lddm"};
    app.require_subcommand(1);

    RegisterArgs reg;
    auto *c_reg = app.add_subcommand("register", "Register a source image to a target image");
    c_reg->add_option("--source", reg.source, "Source image (PGM)")->required();
    c_reg->add_option("--target", reg.target, "Target image (PGM)")->required();
    c_reg->add_option("--config", reg.config, "Match configuration file")->required();
    c_reg->add_option("--out-prefix", reg.out_prefix, "Output file prefix")->required();

    WarpArgs warp;
    auto *c_warp = app.add_subcommand("warp", "Resample an image through an inverse deformation");
    c_warp->add_option("--image", warp.image, "Input image (PGM)")->required();
    c_warp->add_option("--phi-inv", warp.phi_inv, "Inverse displacement field")->required();
    c_warp->add_option("--out", warp.out, "Output image (PGM)")->required();

    InvertArgs inv;
    auto *c_inv = app.add_subcommand("invert", "Invert a displacement field by fixed-point iteration");
    c_inv->add_option("--phi", inv.phi, "Displacement field")->required();
    c_inv->add_option("--out", inv.out, "Output inverse displacement field")->required();
    c_inv->add_option("--max-iter", inv.max_iter, "Iteration cap")->check(CLI::PositiveNumber);
    c_inv->add_option("--tol", inv.tol_px, "Convergence tolerance in pixels")->check(CLI::PositiveNumber);

    CorrespondArgs cor;
    auto *c_cor = app.add_subcommand("correspond", "Map a stored right path to its left-invariant counterpart");
    c_cor->add_option("--phi-path-prefix", cor.path_prefix, "Prefix of <prefix>_path_<k>.field snapshots")
        ->required();
    c_cor->add_option("--out-prefix", cor.out_prefix, "Output file prefix")->required();

    ShootArgs sh;
    auto *c_sh = app.add_subcommand("shoot", "Integrate pulson dynamics");
    c_sh->add_option("--n", sh.n, "Number of pulsons (checked against the initial state)");
    c_sh->add_option("--q", sh.q, "Initial positions x1,y1,x2,y2,...");
    c_sh->add_option("--p", sh.p, "Initial momenta px1,py1,px2,py2,...");
    c_sh->add_option("--state-file", sh.state_file, "Initial state, one 'Qx,Qy,Px,Py' line per pulson");
    c_sh->add_option("--side", sh.side, "left or right");
    c_sh->add_option("--T", sh.duration, "Duration (may be negative)");
    c_sh->add_option("--steps", sh.steps, "RK4 steps")->check(CLI::PositiveNumber);
    c_sh->add_option("--sigma", sh.sigma, "Gaussian kernel width")->check(CLI::PositiveNumber);
    c_sh->add_option("--out", sh.out, "Output CSV")->required();

    KernelApplyArgs ka;
    auto *c_ka = app.add_subcommand("kernel-apply", "Smooth a momentum field with the configured kernel");
    c_ka->add_option("--config", ka.config, "Configuration holding a kernel block")->required();
    c_ka->add_option("--momentum", ka.momentum, "Momentum field")->required();
    c_ka->add_option("--out", ka.out, "Output velocity field")->required();

    PhantomArgs ph;
    auto *c_ph = app.add_subcommand("phantom", "Generate a synthetic bilateral phantom pair");
    c_ph->add_option("--out-prefix", ph.out_prefix, "Output file prefix")->required();
    c_ph->add_option("--size", ph.size, "Width and height in pixels (>= 32)");
    c_ph->add_flag("--lesion", ph.lesion, "Zero a disk in the left hemisphere of the source");
    c_ph->add_option("--seed", ph.seed, "Random seed");

    ExperimentArgs ex;
    auto *c_ex = app.add_subcommand("experiment-lesion", "Run the lesion/symmetry registration experiment");
    c_ex->add_option("--out-dir", ex.out_dir, "Output directory")->required();
    c_ex->add_option("--size", ex.size, "Phantom size in pixels (>= 32)");
    c_ex->add_option("--seed", ex.seed, "Random seed");

    std::vector<std::string> reversed_args(args.rbegin(), args.rend());
    if (!reversed_args.empty()) {
        reversed_args.pop_back(); // program name
    }
    try {
        app.parse(reversed_args);
    } catch (const CLI::CallForHelp &) {
        err << app.help();
        out << "lddm: help OK\n";
        return ok;
    } catch (const CLI::ParseError &e) {
        err << e.what() << "\n";
        out << "lddm: usage: " << e.what() << " error " << usage << "\n";
        return usage;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        std::string summary;
        if (*c_reg) {
            summary = cmd_register(reg);
        } else if (*c_warp) {
            summary = cmd_warp(warp);
        } else if (*c_inv) {
            summary = cmd_invert(inv);
        } else if (*c_cor) {
            summary = cmd_correspond(cor);
        } else if (*c_sh) {
            summary = cmd_shoot(sh);
        } else if (*c_ka) {
            summary = cmd_kernel_apply(ka);
        } else if (*c_ph) {
            summary = cmd_phantom(ph);
        } else {
            summary = cmd_experiment(ex);
        }
        out << summary << " OK\n";
        return ok;
    } catch (const Error &e) {
        const int code = exit_code_for(e.kind());
        out << name << ": " << to_string(e.kind()) << ": " << e.what() << " error " << code << "\n";
        return code;
    } catch (const ValidationFailed &e) {
        out << name << ": " << e.what() << " error " << validation_error << "\n";
        return validation_error;
    } catch (const std::exception &e) {
        out << name << ": " << e.what() << " error " << validation_error << "\n";
        return validation_error;
    }
}

} // namespace lddm::cli
