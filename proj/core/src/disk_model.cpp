#include "reapsnap/disk_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "reapsnap/errors.hpp"

namespace reapsnap {

namespace {

double log2d(double v) { return std::log2(v); }

// Linear interpolation of y over log2(x) between table knots; clamps outside.
double interp_log2(const std::vector<std::pair<double, double>>& knots, double x) {
    if (knots.empty()) throw std::logic_error("no knots");
    if (x <= knots.front().first) return knots.front().second;
    if (x >= knots.back().first) return knots.back().second;
    for (std::size_t i = 1; i < knots.size(); ++i) {
        if (x <= knots[i].first) {
            double x0 = log2d(knots[i - 1].first), x1 = log2d(knots[i].first);
            double t = (log2d(x) - x0) / (x1 - x0);
            return knots[i - 1].second + t * (knots[i].second - knots[i - 1].second);
        }
    }
    return knots.back().second;
}

bool parse_bypass(const std::string& tok, bool& out) {
    if (tok == "yes" || tok == "true" || tok == "1") { out = true; return true; }
    if (tok == "no" || tok == "false" || tok == "0") { out = false; return true; }
    return false;
}

std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') { out.push_back(cur); cur.clear(); }
        else if (!std::isspace(static_cast<unsigned char>(c))) cur.push_back(c);
    }
    out.push_back(cur);
    return out;
}

}  // namespace

StorageModel StorageModel::defaults() {
    return from_points(
        {
            {4096, 1, false, 32.0},
            {4096, 16, false, 360.0},
            {8 * kMiB, 1, false, 275.0},
            {8 * kMiB, 1, true, 533.0},
        },
        850.0, 80.0, {{1, 43.0}, {64, 81.0}});
}

StorageModel StorageModel::from_points(
    std::vector<CalibrationPoint> points, double peak_mbps, double min_latency_us,
    std::vector<std::pair<std::uint32_t, double>> fault_curve) {
    StorageModel m;
    m.points_ = std::move(points);
    m.peak_mbps_ = peak_mbps;
    m.min_latency_us_ = min_latency_us;
    m.fault_curve_ = std::move(fault_curve);
    if (m.fault_curve_.empty()) {
        m.fault_curve_ = {{1, 43.0}, {64, 81.0}};
    }
    std::sort(m.points_.begin(), m.points_.end(), [](const auto& a, const auto& b) {
        return std::tie(a.bypass, a.size_bytes, a.concurrency) <
               std::tie(b.bypass, b.size_bytes, b.concurrency);
    });
    std::sort(m.fault_curve_.begin(), m.fault_curve_.end());
    m.validate();
    return m;
}

void StorageModel::validate() const {
    if (points_.empty()) {
        throw FormatError(FormatIssue::BadField, "calibration has no table points");
    }
    if (peak_mbps_ <= 0) {
        throw FormatError(FormatIssue::BadField, "peak must be positive");
    }
    if (min_latency_us_ < 0) {
        throw FormatError(FormatIssue::BadField, "min_latency_us must be >= 0");
    }
    bool any_plain = false;
    for (const auto& p : points_) {
        if (p.size_bytes == 0 || p.concurrency == 0 || p.mbps <= 0) {
            throw FormatError(FormatIssue::BadField, "calibration point with zero field");
        }
        if (!p.bypass) any_plain = true;
    }
    if (!any_plain) {
        throw FormatError(FormatIssue::BadField,
                          "calibration needs at least one non-bypass point");
    }
    // Aggregate throughput must be non-decreasing in concurrency within a
    // (bypass, size) group, and the fault curve non-decreasing in k;
    // otherwise interpolated rates would not be monotone.
    for (std::size_t i = 1; i < points_.size(); ++i) {
        const auto& a = points_[i - 1];
        const auto& b = points_[i];
        if (a.bypass == b.bypass && a.size_bytes == b.size_bytes) {
            if (a.concurrency == b.concurrency) {
                throw FormatError(FormatIssue::BadField, "duplicate calibration point");
            }
            if (b.mbps < a.mbps) {
                throw FormatError(FormatIssue::BadField,
                                  "throughput decreases with concurrency in table");
            }
        }
    }
    for (std::size_t i = 1; i < fault_curve_.size(); ++i) {
        if (fault_curve_[i].first == fault_curve_[i - 1].first) {
            throw FormatError(FormatIssue::BadField, "duplicate fault curve point");
        }
        if (fault_curve_[i].second < fault_curve_[i - 1].second) {
            throw FormatError(FormatIssue::BadField,
                              "fault curve decreases with concurrency");
        }
    }
    for (const auto& [k, mbps] : fault_curve_) {
        if (k == 0 || mbps <= 0) {
            throw FormatError(FormatIssue::BadField, "fault curve point with zero field");
        }
    }
}

double StorageModel::throughput_mbps(std::uint64_t size, std::uint32_t concurrency,
                                     bool bypass) const {
    if (size == 0 || concurrency == 0) {
        throw std::invalid_argument("throughput needs size > 0 and concurrency >= 1");
    }
    // Collect the size classes of the requested bypass group; fall back to
    // the plain group when no bypass points exist.
    auto gather = [&](bool want) {
        std::map<std::uint64_t, std::vector<std::pair<double, double>>> classes;
        for (const auto& p : points_) {
            if (p.bypass == want) {
                classes[p.size_bytes].push_back(
                    {static_cast<double>(p.concurrency), p.mbps});
            }
        }
        return classes;
    };
    auto classes = gather(bypass);
    if (classes.empty()) classes = gather(!bypass);

    std::vector<std::pair<double, double>> by_size;
    by_size.reserve(classes.size());
    for (auto& [size_class, knots] : classes) {
        std::sort(knots.begin(), knots.end());
        by_size.push_back({static_cast<double>(size_class),
                           interp_log2(knots, static_cast<double>(concurrency))});
    }
    double agg = interp_log2(by_size, static_cast<double>(size));
    return std::min(agg, peak_mbps_);
}

double StorageModel::service_read_us(std::uint64_t bytes, std::uint32_t concurrency,
                                     bool bypass) const {
    if (concurrency == 0) {
        throw std::invalid_argument("concurrency must be >= 1");
    }
    if (bytes == 0) return min_latency_us_;
    double agg = throughput_mbps(bytes, concurrency, bypass);
    double per_request = agg / concurrency;
    return std::max(min_latency_us_, us_for_bytes(static_cast<double>(bytes), per_request));
}

double StorageModel::fault_aggregate_mbps(std::uint32_t k) const {
    if (k == 0) throw std::invalid_argument("fault concurrency must be >= 1");
    std::vector<std::pair<double, double>> knots;
    knots.reserve(fault_curve_.size());
    for (const auto& [c, mbps] : fault_curve_) {
        knots.push_back({static_cast<double>(c), mbps});
    }
    return std::min(interp_log2(knots, static_cast<double>(k)), peak_mbps_);
}

double StorageModel::fault_read_us(std::uint64_t bytes, std::uint32_t k) const {
    if (bytes == 0) return min_latency_us_;
    double per_request = fault_aggregate_mbps(k) / k;
    return std::max(min_latency_us_, us_for_bytes(static_cast<double>(bytes), per_request));
}

double StorageModel::bulk_solo_mbps(std::uint64_t bytes, bool bypass) const {
    return throughput_mbps(bytes, 1, bypass);
}

// ---- calibration file ---------------------------------------------------------

StorageModel StorageModel::parse(const std::string& text, const std::string& origin) {
    std::vector<CalibrationPoint> points;
    std::vector<std::pair<std::uint32_t, double>> fault_curve;
    double peak = -1.0, min_latency = -1.0;

    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string trimmed;
        for (char c : line) {
            if (c == '#') break;
            trimmed.push_back(c);
        }
        while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.back()))) {
            trimmed.pop_back();
        }
        std::size_t start = 0;
        while (start < trimmed.size() &&
               std::isspace(static_cast<unsigned char>(trimmed[start]))) {
            ++start;
        }
        trimmed = trimmed.substr(start);
        if (trimmed.empty()) continue;

        std::string where = origin + ":" + std::to_string(lineno);
        try {
            if (auto eq = trimmed.find('='); eq != std::string::npos) {
                std::string key = trimmed.substr(0, eq);
                std::string val = trimmed.substr(eq + 1);
                if (key == "peak") peak = std::stod(val);
                else if (key == "min_latency_us") min_latency = std::stod(val);
                else throw FormatError(FormatIssue::BadField, where + " unknown key " + key);
                continue;
            }
            auto fields = split_commas(trimmed);
            if (fields.size() == 3 && fields[0] == "fault") {
                fault_curve.push_back({static_cast<std::uint32_t>(std::stoul(fields[1])),
                                       std::stod(fields[2])});
                continue;
            }
            if (fields.size() != 4) {
                throw FormatError(FormatIssue::BadField,
                                  where + " expected size,concurrency,bypass,MBps");
            }
            CalibrationPoint p;
            p.size_bytes = std::stoull(fields[0]);
            p.concurrency = static_cast<std::uint32_t>(std::stoul(fields[1]));
            if (!parse_bypass(fields[2], p.bypass)) {
                throw FormatError(FormatIssue::BadField,
                                  where + " bypass must be yes/no");
            }
            p.mbps = std::stod(fields[3]);
            points.push_back(p);
        } catch (const FormatError&) {
            throw;
        } catch (const std::exception&) {
            throw FormatError(FormatIssue::BadField, where + " non-numeric field");
        }
    }
    if (peak <= 0) {
        throw FormatError(FormatIssue::BadField, origin + " missing peak=<MBps>");
    }
    if (min_latency < 0) {
        throw FormatError(FormatIssue::BadField, origin + " missing min_latency_us=<n>");
    }
    return from_points(std::move(points), peak, min_latency, std::move(fault_curve));
}

StorageModel StorageModel::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw FormatError(FormatIssue::IoError, "cannot open calibration " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path.string());
}

std::string StorageModel::serialize() const {
    std::ostringstream out;
    out << "# storage calibration: size_bytes,concurrency,bypass,MBps\n";
    for (const auto& p : points_) {
        out << p.size_bytes << "," << p.concurrency << "," << (p.bypass ? "yes" : "no")
            << "," << p.mbps << "\n";
    }
    for (const auto& [k, mbps] : fault_curve_) {
        out << "fault," << k << "," << mbps << "\n";
    }
    out << "peak=" << peak_mbps_ << "\n";
    out << "min_latency_us=" << min_latency_us_ << "\n";
    return out.str();
}

void StorageModel::save_file(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) {
        throw FormatError(FormatIssue::IoError, "cannot write calibration " + path.string());
    }
    out << serialize();
}

const char* disk_pattern_name(DiskPattern pattern) {
    switch (pattern) {
        case DiskPattern::Serial4K: return "serial4k";
        case DiskPattern::Parallel4K: return "parallel4k";
        case DiskPattern::Bulk: return "bulk";
        case DiskPattern::BulkBypass: return "bulk_bypass";
    }
    return "unknown";
}

}  // namespace reapsnap
