#pragma once
// Experiment plumbing: INI-style config, least-squares exponent fits,
// deterministic CSV/SVG artifacts, and the reproducible run manifest.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kinlab/util.hpp"

namespace kinlab {

// ---- fitting -----------------------------------------------------------

enum class FitModel { power, stretched_exp };

struct FitResult {
    double exponent = 0.0;   // slope in the linearizing coordinates
    double intercept = 0.0;
    double r_squared = 0.0;
    int n_used = 0;
};

// power: log y vs log(1+t); stretched_exp: log y vs t^stretch_power.
// Window [t_lo, t_hi] inclusive; needs >= 8 positive samples inside.
FitResult fit_exponent(const std::vector<double>& t, const std::vector<double>& y, double t_lo,
                       double t_hi, FitModel model, double stretch_power = 1.0);

// ---- config ------------------------------------------------------------

// Flat INI sections; unknown sections/keys are rejected against a schema.
struct ExperimentConfig {
    std::map<std::string, std::map<std::string, std::string>> sections;
    std::uint64_t seed = 0;
    std::string out_dir = ".";

    bool has(const std::string& sec, const std::string& key) const;
    double get_num(const std::string& sec, const std::string& key, double fallback) const;
    int get_int(const std::string& sec, const std::string& key, int fallback) const;
    std::string get_str(const std::string& sec, const std::string& key,
                        const std::string& fallback) const;
};

// Parses the file and validates every key against the known schema; throws
// PreconditionError naming the offending section/key.
ExperimentConfig load_config(const std::string& path);

// ---- artifacts ---------------------------------------------------------

struct CsvTable {
    std::string header;               // comma-joined column names
    std::vector<std::string> rows;    // preformatted rows (17 significant digits)
};

void write_csv(const std::string& path, const CsvTable& table);

// Minimal log-log SVG: one polyline per series plus an annotated fit line.
struct SvgSeries {
    std::vector<double> x, y;
    std::string label;
};
void write_loglog_svg(const std::string& path, const std::vector<SvgSeries>& series,
                      double fit_exponent, double fit_intercept, const std::string& note);

struct RunManifest {
    std::string config_hash;
    std::string code_version;
    std::string started_utc;
    std::vector<std::pair<std::string, double>> stage_seconds;
    std::vector<std::pair<std::string, std::string>> outputs;  // path, fnv1a hex of bytes

    void add_output(const std::string& path);  // hashes the file contents
    void write(const std::string& path) const;
};

std::string file_checksum_hex(const std::string& path);

}  // namespace kinlab
