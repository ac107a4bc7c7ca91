#include "kinlab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace kinlab {

// ---- fitting -----------------------------------------------------------

FitResult fit_exponent(const std::vector<double>& t, const std::vector<double>& y, double t_lo,
                       double t_hi, FitModel model, double stretch_power) {
    if (t.size() != y.size()) throw PreconditionError("fit_exponent: length mismatch");
    std::vector<double> xs, ys;
    for (size_t i = 0; i < t.size(); ++i) {
        if (t[i] < t_lo || t[i] > t_hi) continue;
        if (!(y[i] > 0.0))
            throw PreconditionError("fit_exponent: non-positive sample inside the window");
        double x = model == FitModel::power ? std::log1p(t[i]) : std::pow(t[i], stretch_power);
        xs.push_back(x);
        ys.push_back(std::log(y[i]));
    }
    if (xs.size() < 8) throw PreconditionError("fit_exponent: fewer than 8 samples in the window");
    const int n = static_cast<int>(xs.size());
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (int i = 0; i < n; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (!(sxx > 0.0)) throw PreconditionError("fit_exponent: degenerate abscissa");
    FitResult out;
    out.exponent = sxy / sxx;
    out.intercept = my - out.exponent * mx;
    double ssres = syy - sxy * sxy / sxx;
    out.r_squared = syy > 0.0 ? 1.0 - ssres / syy : 1.0;
    out.n_used = n;
    return out;
}

// ---- config ------------------------------------------------------------

namespace {

const std::map<std::string, std::set<std::string>>& config_schema() {
    static const std::map<std::string, std::set<std::string>> schema = {
        {"run", {"seed", "out", "workers"}},
        {"grid", {"n_axis", "radius"}},
        {"collision",
         {"gamma", "kappa", "omega_polar", "omega_azimuth", "radial_order", "lattice_correction"}},
        {"weights", {"delta", "big_m", "big_d", "p", "eps", "eps_hat", "p1"}},
        {"decay",
         {"n_rho", "rho_min", "rho_max", "bump_width", "dt", "t_end", "snapshot_stride", "fit_lo",
          "fit_hi", "r2_clean", "p2", "source_kind", "source_rate"}},
        {"picard",
         {"depth", "dt", "t_end", "eta", "n_x", "domain_x", "quad_order", "fit_lo", "fit_hi",
          "tail_times"}},
        {"audit", {"lemmas", "samples", "gammas", "tau", "q", "refine_tol", "dispersion_cap"}},
    };
    return schema;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

bool ExperimentConfig::has(const std::string& sec, const std::string& key) const {
    auto it = sections.find(sec);
    return it != sections.end() && it->second.count(key) > 0;
}

double ExperimentConfig::get_num(const std::string& sec, const std::string& key,
                                 double fallback) const {
    if (!has(sec, key)) return fallback;
    const std::string& v = sections.at(sec).at(key);
    size_t pos = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &pos);
    } catch (const std::exception&) {
        pos = std::string::npos;
    }
    if (pos != v.size())
        throw PreconditionError("config: [" + sec + "] " + key + " is not a number: " + v);
    return x;
}

int ExperimentConfig::get_int(const std::string& sec, const std::string& key, int fallback) const {
    if (!has(sec, key)) return fallback;
    double x = get_num(sec, key, 0.0);
    int i = static_cast<int>(std::llround(x));
    if (std::abs(x - i) > 1e-9)
        throw PreconditionError("config: [" + sec + "] " + key + " is not an integer");
    return i;
}

std::string ExperimentConfig::get_str(const std::string& sec, const std::string& key,
                                      const std::string& fallback) const {
    return has(sec, key) ? sections.at(sec).at(key) : fallback;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw PreconditionError("config: cannot read " + path);
    ExperimentConfig cfg;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw PreconditionError("config: malformed section at line " +
                                        std::to_string(lineno));
            section = trim(line.substr(1, line.size() - 2));
            if (!config_schema().count(section))
                throw PreconditionError("config: unknown section [" + section + "]");
            cfg.sections[section];
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos || section.empty())
            throw PreconditionError("config: expected key = value at line " +
                                    std::to_string(lineno));
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (!config_schema().at(section).count(key))
            throw PreconditionError("config: unknown key '" + key + "' in [" + section + "]");
        cfg.sections[section][key] = val;
    }
    cfg.seed = static_cast<std::uint64_t>(cfg.get_num("run", "seed", 0.0));
    cfg.out_dir = cfg.get_str("run", "out", ".");
    return cfg;
}

// ---- artifacts ---------------------------------------------------------

void write_csv(const std::string& path, const CsvTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw PreconditionError("write_csv: cannot open " + path);
    out << table.header << "\n";
    for (const auto& row : table.rows) out << row << "\n";
    if (!out) throw NumericalError("write_csv: write failed for " + path);
}

void write_loglog_svg(const std::string& path, const std::vector<SvgSeries>& series,
                      double fit_exponent, double fit_intercept, const std::string& note) {
    const double W = 640, H = 440, ml = 70, mr = 20, mt = 20, mb = 50;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (!(s.x[i] > 0.0) || !(s.y[i] > 0.0)) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    if (!(xmax > xmin) || !(ymax > ymin)) {
        xmin = ymin = 0.1;
        xmax = ymax = 10.0;
    }
    auto px = [&](double x) {
        return ml + (std::log10(x) - std::log10(xmin)) / (std::log10(xmax) - std::log10(xmin)) *
                        (W - ml - mr);
    };
    auto py = [&](double y) {
        return H - mb -
               (std::log10(y) - std::log10(ymin)) / (std::log10(ymax) - std::log10(ymin)) *
                   (H - mt - mb);
    };
    std::ofstream out(path, std::ios::binary);
    if (!out) throw PreconditionError("write_loglog_svg: cannot open " + path);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
    out << "<rect x='" << ml << "' y='" << mt << "' width='" << W - ml - mr << "' height='"
        << H - mt - mb << "' fill='none' stroke='black'/>\n";
    const char* colors[] = {"steelblue", "firebrick", "seagreen", "darkorange", "purple"};
    int ci = 0;
    for (const auto& s : series) {
        out << "<polyline fill='none' stroke='" << colors[ci % 5] << "' points='";
        for (size_t i = 0; i < s.x.size(); ++i)
            if (s.x[i] > 0.0 && s.y[i] > 0.0) out << px(s.x[i]) << "," << py(s.y[i]) << " ";
        out << "'/>\n";
        out << "<text x='" << W - mr - 160 << "' y='" << mt + 18 + 16 * ci << "' fill='"
            << colors[ci % 5] << "' font-size='12'>" << s.label << "</text>\n";
        ++ci;
    }
    // fitted power law as a dashed chord, y = e^intercept (1+t)^exponent
    double ya = std::exp(fit_intercept) * std::pow(1.0 + xmin, fit_exponent);
    double yb = std::exp(fit_intercept) * std::pow(1.0 + xmax, fit_exponent);
    out << "<line x1='" << px(xmin) << "' y1='" << py(std::clamp(ya, ymin, ymax)) << "' x2='"
        << px(xmax) << "' y2='" << py(std::clamp(yb, ymin, ymax))
        << "' stroke='gray' stroke-dasharray='6 4'/>\n";
    out << "<text x='" << ml + 8 << "' y='" << mt + 18 << "' font-size='13'>" << note
        << " exponent=" << fmt17(fit_exponent).substr(0, 8) << "</text>\n";
    out << "<text x='" << W / 2 << "' y='" << H - 12 << "' font-size='12'>t</text>\n";
    out << "</svg>\n";
}

std::string file_checksum_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PreconditionError("checksum: cannot read " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::uint64_t h = fnv1a(bytes.data(), bytes.size());
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

void RunManifest::add_output(const std::string& path) {
    outputs.emplace_back(path, file_checksum_hex(path));
}

void RunManifest::write(const std::string& path) const {
    nlohmann::json j;
    j["config_hash"] = config_hash;
    j["code_version"] = code_version;
    j["started_utc"] = started_utc;
    for (const auto& [stage, secs] : stage_seconds) j["stage_seconds"][stage] = secs;
    for (const auto& [file, sum] : outputs) j["outputs"][file] = sum;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw PreconditionError("manifest: cannot open " + path);
    out << j.dump(2) << "\n";
}

}  // namespace kinlab
