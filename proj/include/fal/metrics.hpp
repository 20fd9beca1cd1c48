#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "fal/federation.hpp"

namespace fal {

/// metrics.csv text. The audit columns fl_gap_21, coupling_gap_21 and
/// flip_count are present when `with_audit`; unaudited rounds leave them empty.
std::string metrics_csv(std::span<const RoundRecord> records, bool with_audit);

/// Two stacked line charts against round: adversarial and clean loss, then
/// train and test accuracy. Output depends only on the records.
std::string curves_svg(std::span<const RoundRecord> records, const std::string& title);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace fal
