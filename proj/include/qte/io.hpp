#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "qte/harness.hpp"
#include "qte/histogram.hpp"
#include "qte/synth.hpp"

namespace qte::io {

// BinSpec JSON: {"boundaries": [...], "clip_lo": x, "clip_hi": x, "strategy": "..."}
void write_binspec(const BinSpec& spec, const std::string& path);
BinSpec read_binspec(const std::string& path);

// Observations CSV with header unit_id,arm,value.
void write_observations(std::span<const Observation> observations,
                        const std::string& path);
std::vector<Observation> read_observations(const std::string& path);

// Histogram JSON Lines: {"unit": "...", "arm": "...", "counts": {"idx": count}}
void write_histograms(std::span<const UnitHistogram> histograms,
                      const std::string& path);
std::vector<UnitHistogram> read_histograms(const std::string& path,
                                           std::size_t n_bins);

SynthConfig read_synth_config(const std::string& path);

}  // namespace qte::io
