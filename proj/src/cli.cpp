#include <berlu/cli.hpp>

#include <berlu/analysis.hpp>
#include <berlu/bench.hpp>
#include <berlu/bernstein.hpp>
#include <berlu/data.hpp>
#include <berlu/report_io.hpp>
#include <berlu/trainer.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>

namespace berlu::cli {

namespace {

enum class Format { Text, Csv, Json };

struct Global {
    bool json = false;
    bool csv = false;
    std::uint64_t seed = 0;
    std::string out_path;
    CLI::Option* seed_opt = nullptr;

    Format format(Format fallback = Format::Text) const {
        if (json)
            return Format::Json;
        if (csv)
            return Format::Csv;
        return fallback;
    }
    bool seed_given() const { return seed_opt && seed_opt->count() > 0; }
};

struct ActFlags {
    std::string name = "berlu";
    ActivationOptions opts;

    void add(CLI::App* cmd, const std::string& default_name = "berlu") {
        name = default_name;
        cmd->add_option("--act", name, "Activation family")->capture_default_str();
        cmd->add_option("--alpha", opts.alpha, "Negative slope (berlu, leaky_relu, prelu)")->capture_default_str();
        cmd->add_option("--eps", opts.epsilon, "BerLU transition half-width")->capture_default_str();
        cmd->add_option("--scale", opts.scale, "ELU/CELU scale")->capture_default_str();
    }
    ActivationSpec spec() const { return activation_from_name(name, opts); }
};

// Parses "lo:hi:step" into an inclusive list of points.
std::vector<double> parse_range(const std::string& text) {
    std::stringstream ss(text);
    std::string part;
    std::vector<double> v;
    while (std::getline(ss, part, ':'))
        v.push_back(std::stod(part));
    if (v.size() != 3 || !(v[2] > 0.0) || v[1] < v[0])
        throw std::invalid_argument("range must be lo:hi:step with lo <= hi and step > 0");
    const auto count = static_cast<long>(std::floor((v[1] - v[0]) / v[2] + 1e-9)) + 1;
    std::vector<double> xs;
    for (long i = 0; i < count; ++i)
        xs.push_back(v[0] + static_cast<double>(i) * v[2]);
    return xs;
}

std::pair<int, int> parse_layer_range(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos)
        throw std::invalid_argument("layer range must be first:last");
    return {std::stoi(text.substr(0, colon)), std::stoi(text.substr(colon + 1))};
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> v;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ','))
        if (!part.empty())
            v.push_back(std::stoi(part));
    return v;
}

void set_precision(std::ostream& os) { os << std::setprecision(std::numeric_limits<double>::max_digits10); }

// ---------------------------------------------------------------------------
// Subcommand option records

struct EvalArgs {
    ActFlags act;
    std::vector<double> xs;
    std::string range;
};

struct MollifyArgs {
    std::string pwl;
    std::string preset;
    double alpha = 0.01;
    double eps = 0.01;
    int degree = 2;
    int samples = 201;
};

struct GradCheckArgs {
    ActFlags act;
    double lo = -5.0;
    double hi = 5.0;
    std::size_t points = 10000;
    double step = 1e-5;
    double margin = -1.0;
};

struct LipschitzArgs {
    ActFlags act;
    LipschitzGrid grid;
};

struct ProbeArgs {
    ActFlags act;
    ProbeSettings settings;
    std::string fit;
};

struct DataFlags {
    std::string kind = "moons";
    std::size_t n = 1000;
    double noise = 0.1;
    double turns = 1.5;
    std::string images;
    std::string labels;
    std::string csv_path;
    double val_frac = 0.0;
    bool standardize = false;
    std::uint64_t data_seed = 7;
};

struct TrainArgs {
    ActFlags act;
    std::string config;
    DataFlags data;
    std::string hidden = "32,32";
    std::string metrics_csv;
    bool timing = false;
};

struct SweepArgs {
    std::string config;
    std::string eps_list;
    SweepSettings settings;
    std::string hidden = "32,32";
};

struct BenchArgs {
    std::size_t len = 10'000'000;
    int reps = 20;
    std::vector<std::string> acts;
};

// ---------------------------------------------------------------------------
// Commands

void cmd_eval(const EvalArgs& a, Format fmt, std::ostream& os) {
    const ActivationSpec spec = a.act.spec();
    std::vector<double> xs = a.xs;
    if (!a.range.empty()) {
        const auto r = parse_range(a.range);
        xs.insert(xs.end(), r.begin(), r.end());
    }
    if (xs.empty())
        throw std::invalid_argument("eval: give --x values or --range lo:hi:step");
    require_finite(xs);
    const NumericBuffer f = eval_forward(spec, xs);
    const NumericBuffer df = eval_dx(spec, xs);
    const bool with_alpha = spec.is_parametric();
    const NumericBuffer da = with_alpha ? eval_dalpha(spec, xs) : NumericBuffer{};

    if (fmt == Format::Json) {
        Json j;
        j["spec"] = to_json(spec);
        Json rows = Json::array();
        for (std::size_t i = 0; i < xs.size(); ++i) {
            Json row{{"x", xs[i]}, {"f", f[i]}, {"df_dx", df[i]}};
            if (with_alpha)
                row["df_dalpha"] = da[i];
            rows.push_back(std::move(row));
        }
        j["rows"] = std::move(rows);
        os << j.dump(2) << '\n';
        return;
    }
    if (fmt == Format::Csv) {
        set_precision(os);
        os << "x,f,df_dx" << (with_alpha ? ",df_dalpha" : "") << '\n';
        for (std::size_t i = 0; i < xs.size(); ++i) {
            os << xs[i] << ',' << f[i] << ',' << df[i];
            if (with_alpha)
                os << ',' << da[i];
            os << '\n';
        }
        return;
    }
    os << std::setprecision(12);
    os << std::setw(20) << "x" << std::setw(20) << "f(x)" << std::setw(20) << "df/dx";
    if (with_alpha)
        os << std::setw(20) << "df/dalpha";
    os << '\n';
    for (std::size_t i = 0; i < xs.size(); ++i) {
        os << std::setw(20) << xs[i] << std::setw(20) << f[i] << std::setw(20) << df[i];
        if (with_alpha)
            os << std::setw(20) << da[i];
        os << '\n';
    }
}

PiecewiseLinear load_pwl(const MollifyArgs& a) {
    if (!a.pwl.empty()) {
        if (a.pwl.front() == '{')
            return PiecewiseLinear::from_json(a.pwl);
        std::ifstream in(a.pwl);
        if (!in)
            throw std::runtime_error("cannot open " + a.pwl);
        std::stringstream ss;
        ss << in.rdbuf();
        return PiecewiseLinear::from_json(ss.str());
    }
    const std::string p = a.preset.empty() ? "leaky_relu" : a.preset;
    if (p == "leaky_relu")
        return PiecewiseLinear::leaky_relu(a.alpha);
    if (p == "relu")
        return PiecewiseLinear::leaky_relu(0.0);
    if (p == "identity")
        return PiecewiseLinear::identity();
    if (p == "abs")
        return PiecewiseLinear({0.0}, {-1.0, 1.0}, 0.0);
    throw std::invalid_argument("unknown preset '" + p + "'; valid presets: leaky_relu relu identity abs");
}

void cmd_mollify(const MollifyArgs& a, Format fmt, std::ostream& os) {
    const PiecewiseLinear pwl = load_pwl(a);
    const SmoothedActivation sm = mollify(pwl, a.eps, a.degree);

    // Plot window: every transition plus a margin of a few radii.
    double lo = -4.0 * a.eps, hi = 4.0 * a.eps;
    if (!pwl.breakpoints().empty()) {
        lo = pwl.breakpoints().front() - 4.0 * a.eps;
        hi = pwl.breakpoints().back() + 4.0 * a.eps;
    }
    std::vector<double> xs;
    for (int i = 0; i < a.samples; ++i)
        xs.push_back(a.samples == 1 ? lo : lo + (hi - lo) * i / (a.samples - 1));

    if (fmt == Format::Json) {
        Json j;
        j["base"] = Json::parse(pwl.to_json());
        j["epsilon"] = a.eps;
        j["degree"] = a.degree;
        Json trs = Json::array();
        for (const auto& t : sm.transitions())
            trs.push_back(to_json(t));
        j["transitions"] = std::move(trs);
        Json samples = Json::array();
        for (double x : xs)
            samples.push_back({{"x", x}, {"f", sm.eval(x)}, {"df_dx", sm.derivative(x)}});
        j["samples"] = std::move(samples);
        os << j.dump(2) << '\n';
        return;
    }
    set_precision(os);
    if (fmt == Format::Csv) {
        os << "kind,center,k,value\n";
        for (const auto& t : sm.transitions())
            for (std::size_t k = 0; k < t.control_points.size(); ++k)
                os << "beta," << t.center << ',' << k << ',' << t.control_points[k] << '\n';
        os << "x,f,df_dx\n";
        for (double x : xs)
            os << x << ',' << sm.eval(x) << ',' << sm.derivative(x) << '\n';
        return;
    }
    if (sm.transitions().empty())
        os << "no transitions (function has no breakpoints)\n";
    for (const auto& t : sm.transitions()) {
        os << "breakpoint " << t.center << " beta = [";
        for (std::size_t k = 0; k < t.control_points.size(); ++k)
            os << (k ? ", " : "") << t.control_points[k];
        os << "]\n";
    }
    os << "x,f,df_dx\n";
    for (double x : xs)
        os << x << ',' << sm.eval(x) << ',' << sm.derivative(x) << '\n';
}

void cmd_gradcheck(const GradCheckArgs& a, Format fmt, std::ostream& os) {
    const ActivationSpec spec = a.act.spec();
    const double margin = a.margin >= 0.0 ? a.margin : 10.0 * a.step;
    const auto xs = grid_excluding_kinks(spec, a.lo, a.hi, a.points, margin);
    const GradCheckReport r = grad_check(spec, xs, a.step);
    if (fmt == Format::Json) {
        os << to_json(r).dump(2) << '\n';
        return;
    }
    set_precision(os);
    if (fmt == Format::Csv) {
        os << "activation,points,step,max_rel_error,worst_x\n";
        os << spec.name() << ',' << r.points << ',' << r.step << ',' << r.max_rel_error << ',' << r.worst_x << '\n';
        return;
    }
    os << spec.name() << ": max relative error " << r.max_rel_error << " at x = " << r.worst_x << " over "
       << r.points << " points (step " << r.step << ")\n";
}

void cmd_lipschitz(const LipschitzArgs& a, Format fmt, std::ostream& os) {
    const ActivationSpec spec = a.act.spec();
    const LipschitzReport r = estimate_lipschitz(spec, a.grid);
    if (fmt == Format::Json) {
        os << to_json(r).dump(2) << '\n';
        return;
    }
    set_precision(os);
    if (fmt == Format::Csv) {
        os << "activation,estimate,exact,argmax_x\n";
        os << spec.name() << ',' << r.estimate << ',';
        if (r.exact)
            os << *r.exact;
        os << ',' << r.argmax_x << '\n';
        return;
    }
    os << std::setprecision(6) << std::fixed;
    os << spec.name() << ": L estimate " << r.estimate << " at x = " << r.argmax_x;
    if (r.exact)
        os << " (closed form " << *r.exact << ")";
    os << '\n';
    os.unsetf(std::ios::floatfield);
    if (r.expansive_slope)
        os << "note: |alpha| > 1, the activation is expansive with L = |alpha|\n";
}

void cmd_corr_probe(ProbeArgs a, const Global& g, std::ostream& os) {
    a.settings.seed = g.seed;
    const ActivationSpec spec = a.act.spec();
    const CorrelationTrace t = correlation_probe(spec, a.settings);
    auto [first, last] = a.fit.empty() ? std::pair{std::min(8, t.depth), t.depth} : parse_layer_range(a.fit);
    std::optional<DecayFit> fit;
    std::string fit_error;
    try {
        fit = fit_decay(t, first, last);
    } catch (const std::invalid_argument& e) {
        fit_error = e.what();
    }
    const Format fmt = g.format();
    if (fmt == Format::Json) {
        Json j = to_json(t);
        j["fit"] = fit ? to_json(*fit) : Json(nullptr);
        os << j.dump(2) << '\n';
        return;
    }
    set_precision(os);
    if (fmt == Format::Csv) {
        os << "layer,one_minus_c\n";
        for (std::size_t l = 0; l < t.one_minus_c.size(); ++l)
            os << l + 1 << ',' << t.one_minus_c[l] << '\n';
        return;
    }
    os << "# " << spec.name() << " weight_var=" << t.init.weight_var << " depth=" << t.depth
       << " width=" << t.width << " trials=" << t.trials << " c0=" << t.c0 << '\n';
    os << "layer,one_minus_c\n";
    for (std::size_t l = 0; l < t.one_minus_c.size(); ++l)
        os << l + 1 << ',' << t.one_minus_c[l] << '\n';
    if (fit)
        os << "# fit layers " << fit->first_layer << ".." << fit->last_layer << ": exponent " << fit->exponent
           << " coefficient " << fit->coefficient << " r2 " << fit->r_squared << '\n';
    else
        os << "# fit unavailable: " << fit_error << '\n';
}

Dataset load_dataset(const DataFlags& d, std::uint64_t seed) {
    Dataset ds;
    if (d.kind == "moons") {
        ds = gen_two_moons(d.n, d.noise, d.data_seed);
    } else if (d.kind == "spirals") {
        ds = gen_spirals(d.n, d.turns, d.noise, d.data_seed);
    } else if (d.kind == "idx") {
        if (d.images.empty() || d.labels.empty())
            throw std::invalid_argument("idx dataset needs --images and --labels");
        ds = load_idx(d.images, d.labels, d.val_frac, seed);
    } else if (d.kind == "csv") {
        std::ifstream in(d.csv_path);
        if (!in)
            throw std::runtime_error("cannot open " + d.csv_path);
        ds = read_csv(in);
    } else {
        throw std::invalid_argument("unknown dataset '" + d.kind + "'; valid: moons spirals idx csv");
    }
    if (d.standardize)
        standardize(ds);
    return ds;
}

void cmd_train(const TrainArgs& a, const Global& g, std::ostream& os) {
    TrainConfig cfg = a.config.empty() ? TrainConfig{} : load_train_config(a.config);
    if (g.seed_given())
        cfg.seed = g.seed;
    const Dataset ds = load_dataset(a.data, cfg.seed);
    std::vector<int> dims = {static_cast<int>(ds.dims())};
    for (int h : parse_int_list(a.hidden))
        dims.push_back(h);
    dims.push_back(ds.classes);
    DenseNet net = init_net(dims, a.act.spec(), cfg.seed);
    const RunReport report = train(net, ds, cfg);

    if (!a.metrics_csv.empty()) {
        const bool fresh = !std::filesystem::exists(a.metrics_csv) || std::filesystem::file_size(a.metrics_csv) == 0;
        std::ofstream m(a.metrics_csv, std::ios::app);
        std::ostringstream body;
        write_metrics_csv(body, report);
        const std::string text = body.str();
        m << (fresh ? text : text.substr(text.find('\n') + 1));
    }
    if (g.format(Format::Json) == Format::Csv) {
        write_metrics_csv(os, report);
        return;
    }
    os << to_json(report, a.timing).dump(2) << '\n';
}

void cmd_sweep(SweepArgs a, const Global& g, std::ostream& os) {
    TrainConfig cfg = a.config.empty() ? TrainConfig{} : load_train_config(a.config);
    if (g.seed_given())
        cfg.seed = g.seed;
    if (!a.eps_list.empty()) {
        a.settings.epsilons.clear();
        std::stringstream ss(a.eps_list);
        std::string part;
        while (std::getline(ss, part, ','))
            a.settings.epsilons.push_back(std::stod(part));
    }
    a.settings.hidden = parse_int_list(a.hidden);
    const auto points = run_sweep(a.settings, cfg);
    if (g.format(Format::Csv) == Format::Json) {
        Json j = Json::array();
        for (const auto& p : points)
            j.push_back(to_json(p));
        os << j.dump(2) << '\n';
        return;
    }
    set_precision(os);
    os << "epsilon,mean_acc,std_acc\n";
    for (const auto& p : points)
        os << p.epsilon << ',' << p.mean_acc << ',' << p.std_acc << '\n';
}

void cmd_bench(const BenchArgs& a, const Global& g, std::ostream& os) {
    std::vector<ActivationSpec> specs;
    if (a.acts.empty())
        specs = all_activations();
    else
        for (const auto& n : a.acts)
            specs.push_back(activation_from_name(n));
    const auto results = bench_suite(specs, a.len, a.reps, g.seed);
    if (g.format(Format::Csv) == Format::Json) {
        Json j = Json::array();
        for (const auto& r : results)
            j.push_back(to_json(r));
        os << j.dump(2) << '\n';
        return;
    }
    write_bench_csv(os, results);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Bernstein linear unit workbench", "berlu"};
    app.fallthrough();
    app.require_subcommand(1);

    Global g;
    app.add_flag("--json", g.json, "Emit JSON");
    app.add_flag("--csv", g.csv, "Emit CSV");
    g.seed_opt = app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
    app.add_option("--out", g.out_path, "Write data output to this file instead of stdout");

    EvalArgs eval;
    auto* c_eval = app.add_subcommand("eval", "Tabulate f, df/dx and df/dalpha");
    eval.act.add(c_eval);
    c_eval->add_option("--x", eval.xs, "Input values")->allow_extra_args(false);
    c_eval->add_option("--range", eval.range, "lo:hi:step (inclusive)");

    MollifyArgs moll;
    auto* c_moll = app.add_subcommand("mollify", "Bernstein-smooth a piecewise-linear function");
    c_moll->add_option("--pwl", moll.pwl, "PiecewiseLinear JSON document or path to one");
    c_moll->add_option("--preset", moll.preset, "leaky_relu | relu | identity | abs");
    c_moll->add_option("--alpha", moll.alpha, "Slope for the leaky_relu preset")->capture_default_str();
    c_moll->add_option("--eps", moll.eps, "Transition half-width")->capture_default_str();
    c_moll->add_option("--degree", moll.degree, "Bernstein degree (>= 2)")->capture_default_str();
    c_moll->add_option("--samples", moll.samples, "Dense samples for plotting")->capture_default_str();

    GradCheckArgs gc;
    auto* c_gc = app.add_subcommand("gradcheck", "Analytic derivative vs central differences");
    gc.act.add(c_gc);
    c_gc->add_option("--lo", gc.lo)->capture_default_str();
    c_gc->add_option("--hi", gc.hi)->capture_default_str();
    c_gc->add_option("--points", gc.points)->capture_default_str();
    c_gc->add_option("--step", gc.step)->capture_default_str();
    c_gc->add_option("--margin", gc.margin, "Kink exclusion radius (default 10*step)");

    LipschitzArgs lip;
    auto* c_lip = app.add_subcommand("lipschitz", "Numerical Lipschitz constant");
    lip.act.add(c_lip);
    c_lip->add_option("--lo", lip.grid.lo)->capture_default_str();
    c_lip->add_option("--hi", lip.grid.hi)->capture_default_str();
    c_lip->add_option("--coarse", lip.grid.coarse_points)->capture_default_str();
    c_lip->add_option("--refine", lip.grid.refine_iters)->capture_default_str();

    ProbeArgs probe;
    auto* c_probe = app.add_subcommand("corr-probe", "Correlation decay through random deep layers");
    probe.act.add(c_probe);
    c_probe->add_option("--depth", probe.settings.depth)->capture_default_str();
    c_probe->add_option("--width", probe.settings.width)->capture_default_str();
    c_probe->add_option("--trials", probe.settings.trials)->capture_default_str();
    c_probe->add_option("--c0", probe.settings.c0)->capture_default_str();
    c_probe->add_option("--q", probe.settings.target_q)->capture_default_str();
    c_probe->add_option("--threads", probe.settings.threads, "0 = hardware concurrency")->capture_default_str();
    c_probe->add_option("--fit", probe.fit, "first:last layers for the decay fit (default 8:depth)");

    TrainArgs tr;
    auto* c_train = app.add_subcommand("train", "Train a dense classifier");
    tr.act.add(c_train);
    c_train->add_option("--config", tr.config, "TrainConfig JSON file");
    c_train->add_option("--dataset", tr.data.kind, "moons | spirals | idx | csv")->capture_default_str();
    c_train->add_option("--n", tr.data.n, "Synthetic sample count")->capture_default_str();
    c_train->add_option("--noise", tr.data.noise)->capture_default_str();
    c_train->add_option("--turns", tr.data.turns)->capture_default_str();
    c_train->add_option("--data-seed", tr.data.data_seed)->capture_default_str();
    c_train->add_option("--images", tr.data.images, "IDX image file");
    c_train->add_option("--labels", tr.data.labels, "IDX label file");
    c_train->add_option("--data", tr.data.csv_path, "CSV dataset (y,x0,x1,...)");
    c_train->add_option("--val-frac", tr.data.val_frac, "Validation fraction for idx data")->capture_default_str();
    c_train->add_flag("--standardize", tr.data.standardize, "Standardize features on the training split");
    c_train->add_option("--hidden", tr.hidden, "Hidden widths, comma separated")->capture_default_str();
    c_train->add_option("--metrics-csv", tr.metrics_csv, "Append per-epoch metrics to this CSV");
    c_train->add_flag("--timing", tr.timing, "Include wall_time_s in the report");

    SweepArgs sw;
    auto* c_sweep = app.add_subcommand("sweep", "Accuracy across BerLU smoothing radii");
    c_sweep->add_option("--config", sw.config, "TrainConfig JSON file");
    c_sweep->add_option("--eps-list", sw.eps_list, "Comma-separated radii (default 1e-4..10 grid)");
    c_sweep->add_option("--seeds", sw.settings.seeds)->capture_default_str();
    c_sweep->add_option("--alpha", sw.settings.alpha)->capture_default_str();
    c_sweep->add_option("--hidden", sw.hidden)->capture_default_str();
    c_sweep->add_option("--n", sw.settings.samples)->capture_default_str();
    c_sweep->add_option("--turns", sw.settings.turns)->capture_default_str();
    c_sweep->add_option("--noise", sw.settings.noise)->capture_default_str();
    c_sweep->add_option("--data-seed", sw.settings.data_seed)->capture_default_str();
    c_sweep->add_option("--threads", sw.settings.threads, "0 = hardware concurrency")->capture_default_str();

    BenchArgs bench;
    auto* c_bench = app.add_subcommand("bench", "Elementwise forward/backward timing");
    c_bench->add_option("--len", bench.len)->capture_default_str();
    c_bench->add_option("--reps", bench.reps)->capture_default_str();
    c_bench->add_option("--act", bench.acts, "Activations to time (default all)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: usage: " << e.what() << '\n';
        return 2;
    }

    std::unique_ptr<std::ofstream> file;
    if (!g.out_path.empty()) {
        file = std::make_unique<std::ofstream>(g.out_path);
        if (!*file) {
            err << "error: io: cannot open " << g.out_path << '\n';
            return 1;
        }
    }
    std::ostream& os = file ? *file : out;

    try {
        if (*c_eval)
            cmd_eval(eval, g.format(), os);
        else if (*c_moll)
            cmd_mollify(moll, g.format(), os);
        else if (*c_gc)
            cmd_gradcheck(gc, g.format(), os);
        else if (*c_lip)
            cmd_lipschitz(lip, g.format(), os);
        else if (*c_probe)
            cmd_corr_probe(probe, g, os);
        else if (*c_train)
            cmd_train(tr, g, os);
        else if (*c_sweep)
            cmd_sweep(sw, g, os);
        else if (*c_bench)
            cmd_bench(bench, g, os);
    } catch (const std::invalid_argument& e) {
        err << "error: invalid-argument: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: runtime: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace berlu::cli
