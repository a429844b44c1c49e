#include "levsense/trace_io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace levsense::io {

namespace {

constexpr char kMagic[4] = {'L', 'E', 'V', 'I'};

template <class T>
T to_little(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        for (std::size_t k = 0; k < sizeof(T) / 2; ++k) std::swap(b[k], b[sizeof(T) - 1 - k]);
        std::memcpy(&v, b, sizeof(T));
    }
    return v;
}

template <class T>
void put(std::ostream& out, T v) {
    v = to_little(v);
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in, const std::filesystem::path& path) {
    T v;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T)))
        throw ArgumentError("truncated trace file '" + path.string() + "'");
    return to_little(v);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<double> split_numbers(const std::string& line, const std::filesystem::path& path,
                                  int lineno) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= line.size()) {
        std::size_t end = line.find(',', pos);
        if (end == std::string::npos) end = line.size();
        std::string cell = line.substr(pos, end - pos);
        auto b = cell.find_first_not_of(" \t\r");
        auto e = cell.find_last_not_of(" \t\r");
        cell = b == std::string::npos ? std::string() : cell.substr(b, e - b + 1);
        double v = 0.0;
        auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (ec != std::errc() || p != cell.data() + cell.size())
            throw ArgumentError(path.string() + ":" + std::to_string(lineno) + ": '" + cell +
                                "' is not a number");
        out.push_back(v);
        pos = end + 1;
    }
    return out;
}

// Rows of a CSV with one header line and optional '#' comments.
std::vector<std::vector<double>> read_table(const std::filesystem::path& path, std::size_t columns,
                                            std::vector<std::string>* comments = nullptr) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open '" + path.string() + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    int lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        if (line[0] == '#') {
            if (comments) comments->push_back(line);
            continue;
        }
        if (!header) {
            header = true;
            continue;
        }
        auto row = split_numbers(line, path, lineno);
        if (columns && row.size() != columns)
            throw ArgumentError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                                std::to_string(columns) + " columns");
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

void write_levi(const std::filesystem::path& path, const Channels& ch) {
    const std::uint64_t n = ch.data.empty() ? 0 : ch.data.front().size();
    for (const auto& c : ch.data)
        if (c.size() != n) throw ArgumentError("channels differ in length");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out.write(kMagic, 4);
    put<std::uint32_t>(out, kLeviVersion);
    put<double>(out, ch.sample_rate);
    put<std::uint64_t>(out, n);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ch.data.size()));
    for (const auto& c : ch.data)
        for (double v : c) put<double>(out, v);
}

Channels read_levi(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("cannot open '" + path.string() + "'");
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw ArgumentError("'" + path.string() + "' is not a LEVI trace");
    auto ver = get<std::uint32_t>(in, path);
    if (ver != kLeviVersion) throw ArgumentError("unsupported LEVI version " + std::to_string(ver));
    Channels ch;
    ch.sample_rate = get<double>(in, path);
    auto n = get<std::uint64_t>(in, path);
    auto nch = get<std::uint32_t>(in, path);
    ch.data.assign(nch, std::vector<double>(n));
    for (auto& c : ch.data)
        for (auto& v : c) v = get<double>(in, path);
    return ch;
}

void write_trace_csv(const std::filesystem::path& path, const Channels& ch,
                     const std::vector<std::string>& names) {
    if (names.size() != ch.data.size()) throw ArgumentError("one column name per channel required");
    std::vector<std::string> header{"t_s"};
    header.insert(header.end(), names.begin(), names.end());
    const std::size_t n = ch.data.empty() ? 0 : ch.data.front().size();
    std::vector<std::vector<double>> rows(n);
    for (std::size_t k = 0; k < n; ++k) {
        rows[k].push_back(static_cast<double>(k) / ch.sample_rate);
        for (const auto& c : ch.data) rows[k].push_back(c[k]);
    }
    write_csv(path, header, rows);
}

Channels read_trace_csv(const std::filesystem::path& path) {
    auto rows = read_table(path, 0);
    if (rows.size() < 2) throw ArgumentError("trace CSV needs at least two samples");
    const std::size_t cols = rows.front().size();
    if (cols < 2) throw ArgumentError("trace CSV needs a time column and a channel");
    Channels ch;
    const double dt = (rows.back()[0] - rows.front()[0]) / static_cast<double>(rows.size() - 1);
    if (!(dt > 0.0)) throw ArgumentError("time column must increase");
    ch.sample_rate = 1.0 / dt;
    ch.data.assign(cols - 1, std::vector<double>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (rows[k].size() != cols) throw ArgumentError("ragged trace CSV");
        for (std::size_t c = 1; c < cols; ++c) ch.data[c - 1][k] = rows[k][c];
    }
    return ch;
}

Channels read_channels(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("cannot open '" + path.string() + "'");
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() == 4 && std::memcmp(magic, kMagic, 4) == 0) return read_levi(path);
    return read_trace_csv(path);
}

spectral::TimeTrace to_time_trace(const Channels& ch) {
    if (ch.data.size() != 2) throw ArgumentError("expected two channels (I, Q)");
    spectral::TimeTrace tr;
    tr.sample_rate = ch.sample_rate;
    tr.i = ch.data[0];
    tr.q = ch.data[1];
    tr.validate();
    return tr;
}

Channels from_time_trace(const spectral::TimeTrace& tr) {
    return {tr.sample_rate, {tr.i, tr.q}};
}

void write_spectrum_csv(const std::filesystem::path& path, const spectral::SpectrumRecord& s) {
    std::vector<std::vector<double>> rows;
    rows.reserve(s.freq.size());
    for (std::size_t k = 0; k < s.freq.size(); ++k) rows.push_back({s.freq[k], s.psd[k]});
    write_csv(path, {"freq_Hz", "value"}, rows,
              {"units: " + std::string(spectral::units_tag(s.units)), "enbw_Hz: " + fmt(s.enbw)});
}

spectral::SpectrumRecord read_spectrum_csv(const std::filesystem::path& path) {
    std::vector<std::string> comments;
    auto rows = read_table(path, 2, &comments);
    spectral::SpectrumRecord s;
    bool have_units = false;
    for (const std::string& c : comments) {
        auto body = c.substr(c.find_first_not_of("# "));
        if (body.rfind("units:", 0) == 0) {
            auto tag = body.substr(6);
            tag.erase(0, tag.find_first_not_of(' '));
            s.units = spectral::units_from_tag(tag);
            have_units = true;
        } else if (body.rfind("enbw_Hz:", 0) == 0) {
            s.enbw = std::stod(body.substr(8));
        }
    }
    if (!have_units) throw ArgumentError("spectrum CSV lacks a units comment");
    for (auto& r : rows) {
        s.freq.push_back(r[0]);
        s.psd.push_back(r[1]);
    }
    return s;
}

std::vector<cavity::S21Point> read_s21_csv(const std::filesystem::path& path) {
    std::vector<cavity::S21Point> pts;
    for (auto& r : read_table(path, 3)) pts.push_back({hz_to_rad(r[0]), {r[1], r[2]}});
    return pts;
}

void write_s21_csv(const std::filesystem::path& path, const std::vector<cavity::S21Point>& pts) {
    std::vector<std::vector<double>> rows;
    for (const auto& p : pts) rows.push_back({rad_to_hz(p.omega), p.value.real(), p.value.imag()});
    write_csv(path, {"frequency_Hz", "re_S21", "im_S21"}, rows);
}

std::vector<cavity::TuningPoint> read_tuning_csv(const std::filesystem::path& path) {
    std::vector<cavity::TuningPoint> pts;
    for (auto& r : read_table(path, 2)) pts.emplace_back(r[0], hz_to_rad(r[1]));
    return pts;
}

void write_fluxmap_csv(const std::filesystem::path& path, const std::vector<flux::FluxMapRow>& rows) {
    std::vector<std::vector<double>> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back({r.dx * 1e6, r.dy * 1e6, r.F[0], r.F[1], r.F[2]});
    write_csv(path, {"dx_um", "dy_um", "F_x", "F_y", "F_z"}, out);
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows, const std::vector<std::string>& comments) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    for (const auto& c : comments) out << "# " << c << '\n';
    for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
    out << '\n';
    for (const auto& r : rows) {
        for (std::size_t k = 0; k < r.size(); ++k) out << (k ? "," : "") << fmt(r[k]);
        out << '\n';
    }
}

}  // namespace levsense::io
