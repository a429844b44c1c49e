// trace_io.hpp - dataset files.
//
// LEVI binary trace: "LEVI", u32 version, f64 sample rate, u64 samples,
// u32 channels, then each channel as a contiguous block of f64. All fields
// little-endian.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "levsense/cavity_squid.hpp"
#include "levsense/flux_geometry.hpp"
#include "levsense/spectral.hpp"

namespace levsense::io {

inline constexpr std::uint32_t kLeviVersion = 1;

struct Channels {
    double sample_rate = 0.0;
    std::vector<std::vector<double>> data;
};

void write_levi(const std::filesystem::path& path, const Channels& ch);
Channels read_levi(const std::filesystem::path& path);

/// CSV with a t_s column followed by one column per channel.
void write_trace_csv(const std::filesystem::path& path, const Channels& ch,
                     const std::vector<std::string>& names);
Channels read_trace_csv(const std::filesystem::path& path);

/// Dispatches on the magic bytes.
Channels read_channels(const std::filesystem::path& path);

/// Two channels are read as I and Q.
spectral::TimeTrace to_time_trace(const Channels& ch);
Channels from_time_trace(const spectral::TimeTrace& tr);

/// "# units: <tag>" and "# enbw_Hz: <value>" comments, then freq_Hz,value.
void write_spectrum_csv(const std::filesystem::path& path, const spectral::SpectrumRecord& s);
spectral::SpectrumRecord read_spectrum_csv(const std::filesystem::path& path);

/// frequency_Hz, re_S21, im_S21.
std::vector<cavity::S21Point> read_s21_csv(const std::filesystem::path& path);
void write_s21_csv(const std::filesystem::path& path, const std::vector<cavity::S21Point>& pts);

/// flux_Phi0, frequency_Hz.
std::vector<cavity::TuningPoint> read_tuning_csv(const std::filesystem::path& path);

void write_fluxmap_csv(const std::filesystem::path& path, const std::vector<flux::FluxMapRow>& rows);

/// Plain numeric table; numbers printed with %.17g.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows,
               const std::vector<std::string>& comments = {});

}  // namespace levsense::io
