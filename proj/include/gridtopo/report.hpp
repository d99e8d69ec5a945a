#pragma once

#include <string>
#include <vector>

#include "gridtopo/model.hpp"
#include "gridtopo/reconnect.hpp"
#include "json.hpp"

namespace gridtopo::report {

// Renders the canonical report document as terminal-friendly text. Stage
// timings are passed separately because the canonical document excludes them.
std::string render_text(const nlohmann::ordered_json& canonical,
                        const std::vector<std::pair<std::string, double>>& stage_seconds = {});

// Feeder map scatter: transformers as squares, premises as dots, with a line
// from every reassigned premise to its new transformer. Entities without a
// location are left out. Self-contained SVG.
std::string map_svg(const Topology& topology,
                    const std::vector<reconnect::Reassignment>& moves);

// Overlay of the primary voltage channel for the given premises (first
// max_series drawn). Missing samples break the polyline.
std::string voltage_svg(const SeriesFrame& frame, const std::vector<std::string>& premise_ids,
                        std::size_t max_series = 12);

}  // namespace gridtopo::report
