// Copyright 2026 The Anchorprune Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "anchorprune/report.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "anchorprune/errors.h"
#include "json_util.h"

namespace anchorprune {

using internal::Json;
using internal::OrderedJson;

namespace {

std::string ShortestDouble(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::string Fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string XmlEscape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

OrderedJson MetadataJson(const FrontierMetadata& meta) {
  OrderedJson j;
  j["format"] = kFrontierFormat;
  j["head_spec_digest"] = meta.head_spec_digest;
  j["resource"] = ToString(meta.resource);
  j["metric"] = ToString(meta.metric);
  j["mode"] = ToString(meta.mode);
  j["theta"] = meta.theta;
  return j;
}

OrderedJson KeptJson(const AnchorConfiguration& config) {
  OrderedJson kept = OrderedJson::array();
  for (const AnchorId& id : config.Kept()) kept.push_back({id.layer, id.slot});
  return kept;
}

FrontierMetadata ParseMetadata(const Json& j, const HeadSpec& head) {
  using namespace internal;
  FrontierMetadata meta;
  if (GetString(j, "format", "frontier") != kFrontierFormat) {
    throw InputError("frontier.format", "unsupported format");
  }
  meta.head_spec_digest = GetString(j, "head_spec_digest", "frontier");
  if (meta.head_spec_digest != head.Digest()) {
    throw BindingError("frontier.head_spec_digest",
                       "frontier was produced for a different head");
  }
  const std::string resource = GetString(j, "resource", "frontier");
  if (resource == "flops") {
    meta.resource = ResourceMetric::kHeadFlops;
  } else if (resource == "bboxes") {
    meta.resource = ResourceMetric::kBBoxCount;
  } else {
    throw InputError("frontier.resource", "unknown resource \"" + resource + "\"");
  }
  const std::string metric = GetString(j, "metric", "frontier");
  if (metric == "coco") {
    meta.metric = Protocol::kCocoStyle;
  } else if (metric == "voc50") {
    meta.metric = Protocol::kVoc50;
  } else {
    throw InputError("frontier.metric", "unknown metric \"" + metric + "\"");
  }
  const std::string mode = GetString(j, "mode", "frontier");
  if (mode == "per-anchor") {
    meta.mode = NeighborMode::kPerAnchor;
  } else if (mode == "shared") {
    meta.mode = NeighborMode::kSharedSlotOrLayer;
  } else {
    throw InputError("frontier.mode", "unknown mode \"" + mode + "\"");
  }
  meta.theta = GetNumber(j, "theta", "frontier");
  return meta;
}

// Parses and cross-checks one serialized (config, kept, accuracy, cost).
TrajectoryPoint ParsePoint(const Json& e, const std::string& locus,
                           const std::shared_ptr<const HeadSpec>& head,
                           ResourceMetric resource) {
  using namespace internal;
  RequireObject(e, locus);
  AnchorConfiguration config(
      head, AnchorMask::FromHex(GetString(e, "config", locus),
                                head->num_anchors()));
  const Json& kept = GetArray(e, "kept", locus);
  std::vector<AnchorId> ids;
  for (const Json& k : kept) {
    if (!k.is_array() || k.size() != 2 || !k[0].is_number_integer() ||
        !k[1].is_number_integer()) {
      throw InputError(locus + ".kept", "expected [layer, slot] pairs");
    }
    ids.push_back({k[0].get<int>(), k[1].get<int>()});
  }
  if (ids != config.Kept()) {
    throw InputError(locus, "kept anchors disagree with the config mask");
  }
  TrajectoryPoint p{config, GetNumber(e, "accuracy", locus),
                    GetInt(e, "cost", locus)};
  if (p.cost != ResourceCost(config, resource)) {
    throw InputError(locus, "cost does not match the head's cost model");
  }
  if (!(p.accuracy >= 0 && p.accuracy <= 1)) {
    throw InputError(locus, "accuracy must lie in [0, 1]");
  }
  return p;
}

// Axis mapping for plots.
struct Scale {
  double lo;
  double hi;
  double px_lo;
  double px_hi;

  double operator()(double v) const {
    if (hi <= lo) return (px_lo + px_hi) / 2;
    return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo);
  }
};

std::pair<double, double> Padded(double lo, double hi) {
  if (hi <= lo) {
    const double pad = lo == 0 ? 1.0 : std::abs(lo) * 0.05;
    return {lo - pad, hi + pad};
  }
  const double pad = (hi - lo) * 0.05;
  return {lo - pad, hi + pad};
}

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c",
                                    "#d62728", "#9467bd", "#8c564b",
                                    "#e377c2", "#7f7f7f", "#bcbd22",
                                    "#17becf"};

}  // namespace

std::string FrontierToJson(const Frontier& frontier,
                           const FrontierMetadata& meta) {
  OrderedJson j = MetadataJson(meta);
  OrderedJson entries = OrderedJson::array();
  for (const FrontierEntry& e : frontier.entries()) {
    OrderedJson je;
    je["config"] = e.config.Encoding();
    je["kept"] = KeptJson(e.config);
    je["accuracy"] = e.accuracy;
    je["cost"] = e.cost;
    je["parent"] = e.parent ? OrderedJson(e.parent->ToHex()) : OrderedJson();
    entries.push_back(std::move(je));
  }
  j["entries"] = std::move(entries);
  return j.dump(2) + "\n";
}

std::string FrontierToCsv(const Frontier& frontier) {
  std::string out = "encoding,accuracy,cost\n";
  for (const FrontierEntry& e : frontier.entries()) {
    out += e.config.Encoding() + "," + ShortestDouble(e.accuracy) + "," +
           std::to_string(e.cost) + "\n";
  }
  return out;
}

ParsedFrontier ParseFrontierJson(std::string_view text,
                                 std::shared_ptr<const HeadSpec> head) {
  using namespace internal;
  const Json j = ParseJson(text, "frontier");
  RequireObject(j, "frontier");
  ParsedFrontier out;
  out.meta = ParseMetadata(j, *head);
  const Json& entries = GetArray(j, "entries", "frontier");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::string locus = Index("entries", i);
    TrajectoryPoint p = ParsePoint(entries[i], locus, head, out.meta.resource);
    FrontierEntry e{p.config, p.accuracy, p.cost, std::nullopt};
    const Json& parent = Field(entries[i], "parent", locus);
    if (!parent.is_null()) {
      if (!parent.is_string()) {
        throw InputError(locus + ".parent", "expected a hex string or null");
      }
      e.parent = AnchorMask::FromHex(parent.get<std::string>(),
                                     head->num_anchors());
    }
    if (!out.frontier.Insert(std::move(e)) ||
        out.frontier.size() != i + 1) {
      throw InputError(locus, "entries are not a valid Pareto frontier");
    }
  }
  if (!out.frontier.IsValid()) {
    throw InputError("frontier", "entries are not in ascending cost order");
  }
  return out;
}

std::string TrajectoryToJson(const std::vector<TrajectoryPoint>& points,
                             const FrontierMetadata& meta) {
  OrderedJson j = MetadataJson(meta);
  j["format"] = "anchor-trajectory/v1";
  OrderedJson entries = OrderedJson::array();
  for (const TrajectoryPoint& p : points) {
    OrderedJson je;
    je["config"] = p.config.Encoding();
    je["kept"] = KeptJson(p.config);
    je["accuracy"] = p.accuracy;
    je["cost"] = p.cost;
    entries.push_back(std::move(je));
  }
  j["points"] = std::move(entries);
  return j.dump(2) + "\n";
}

std::string TrajectoryToCsv(const std::vector<TrajectoryPoint>& points) {
  std::string out = "encoding,accuracy,cost\n";
  for (const TrajectoryPoint& p : points) {
    out += p.config.Encoding() + "," + ShortestDouble(p.accuracy) + "," +
           std::to_string(p.cost) + "\n";
  }
  return out;
}

std::vector<TrajectoryPoint> ParseTrajectoryJson(
    std::string_view text, std::shared_ptr<const HeadSpec> head) {
  using namespace internal;
  Json j = ParseJson(text, "trajectory");
  RequireObject(j, "trajectory");
  if (GetString(j, "format", "trajectory") != "anchor-trajectory/v1") {
    throw InputError("trajectory.format", "unsupported format");
  }
  j["format"] = kFrontierFormat;
  const FrontierMetadata meta = ParseMetadata(j, *head);
  std::vector<TrajectoryPoint> points;
  const Json& entries = GetArray(j, "points", "trajectory");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    points.push_back(
        ParsePoint(entries[i], Index("points", i), head, meta.resource));
  }
  return points;
}

// ---------------------------------------------------------------------------
// Plots

std::string RenderFrontierSvg(const Frontier& frontier,
                              const std::vector<TrajectoryPoint>& baseline,
                              const FrontierPlotOptions& options) {
  constexpr double kWidth = 640;
  constexpr double kHeight = 440;
  constexpr double kLeft = 70;
  constexpr double kRight = 20;
  constexpr double kTop = 40;
  constexpr double kBottom = 60;

  double cmin = INFINITY, cmax = -INFINITY, amin = INFINITY, amax = -INFINITY;
  auto extend = [&](double c, double a) {
    cmin = std::min(cmin, c);
    cmax = std::max(cmax, c);
    amin = std::min(amin, a);
    amax = std::max(amax, a);
  };
  for (const FrontierEntry& e : frontier.entries()) {
    extend(e.cost / options.cost_scale, e.accuracy);
  }
  for (const TrajectoryPoint& p : baseline) {
    extend(p.cost / options.cost_scale, p.accuracy);
  }
  if (cmin > cmax) {
    cmin = 0, cmax = 1, amin = 0, amax = 1;
  }
  auto [clo, chi] = Padded(cmin, cmax);
  auto [alo, ahi] = Padded(amin, amax);
  const Scale sx{clo, chi, kLeft, kWidth - kRight};
  const Scale sy{alo, ahi, kHeight - kBottom, kTop};

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
      << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" "
      << "font-size=\"15\">" << XmlEscape(options.title) << "</text>\n";
  // Axes with five ticks each.
  svg << "<g class=\"axes\" stroke=\"#333\">\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom
      << "\" x2=\"" << kWidth - kRight << "\" y2=\"" << kHeight - kBottom
      << "\"/>\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft
      << "\" y2=\"" << kHeight - kBottom << "\"/>\n";
  svg << "</g>\n<g class=\"ticks\" fill=\"#333\">\n";
  for (int t = 0; t <= 4; ++t) {
    const double cv = clo + (chi - clo) * t / 4;
    const double av = alo + (ahi - alo) * t / 4;
    svg << "<text x=\"" << Fixed(sx(cv)) << "\" y=\""
        << kHeight - kBottom + 18 << "\" text-anchor=\"middle\">"
        << Fixed(cv, 1) << "</text>\n";
    svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << Fixed(sy(av) + 4)
        << "\" text-anchor=\"end\">" << Fixed(av, 3) << "</text>\n";
  }
  svg << "</g>\n";
  svg << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\""
      << kHeight - 15 << "\" text-anchor=\"middle\">"
      << XmlEscape(options.x_label) << "</text>\n";
  svg << "<text transform=\"translate(18," << (kTop + kHeight - kBottom) / 2
      << ") rotate(-90)\" text-anchor=\"middle\">"
      << XmlEscape(options.y_label) << "</text>\n";

  for (const TrajectoryPoint& p : baseline) {
    svg << "<circle class=\"baseline-marker\" cx=\""
        << Fixed(sx(p.cost / options.cost_scale)) << "\" cy=\""
        << Fixed(sy(p.accuracy)) << "\" r=\"2.5\" fill=\"#999\"/>\n";
  }

  const auto& entries = frontier.entries();
  if (!entries.empty()) {
    std::string d = "M" + Fixed(sx(entries[0].cost / options.cost_scale)) +
                    "," + Fixed(sy(entries[0].accuracy));
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const double next_cost = i + 1 < entries.size()
                                   ? entries[i + 1].cost / options.cost_scale
                                   : chi;
      d += " H" + Fixed(sx(next_cost));
      if (i + 1 < entries.size()) d += " V" + Fixed(sy(entries[i + 1].accuracy));
    }
    svg << "<path class=\"frontier-staircase\" d=\"" << d
        << "\" fill=\"none\" stroke=\"#ff7f0e\" stroke-width=\"1.5\"/>\n";
  }
  for (const FrontierEntry& e : entries) {
    const std::string cx = Fixed(sx(e.cost / options.cost_scale));
    const std::string cy = Fixed(sy(e.accuracy));
    svg << "<circle class=\"frontier-marker\" cx=\"" << cx << "\" cy=\"" << cy
        << "\" r=\"4\" fill=\"#ff7f0e\"><title>" << e.config.Encoding()
        << "</title></circle>\n";
    if (options.unpruned_encoding &&
        e.config.Encoding() == *options.unpruned_encoding) {
      svg << "<circle class=\"unpruned-highlight\" cx=\"" << cx << "\" cy=\""
          << cy << "\" r=\"7\" fill=\"none\" stroke=\"#1f77b4\" "
          << "stroke-width=\"2\"/>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string RenderShapeDistributionSvg(const ShapeDistribution& dist,
                                       const std::vector<int>& layers) {
  constexpr double kPlot = 420;
  constexpr double kMargin = 60;
  constexpr double kMarginal = 60;
  const double size = kMargin + kPlot + kMarginal + 20;
  const HistogramAxes& axes = dist.axes;
  const double bin_px = kPlot / axes.bins;

  auto selected = [&](const AnchorShapeHistogram& h) {
    return layers.empty() ||
           std::find(layers.begin(), layers.end(), h.anchor.layer) !=
               layers.end();
  };
  std::size_t max_bin = 1;
  std::vector<std::size_t> wm(axes.bins, 0), hm(axes.bins, 0);
  for (const AnchorShapeHistogram& h : dist.anchors) {
    if (!selected(h)) continue;
    for (const auto& [cell, n] : h.bins) max_bin = std::max(max_bin, n);
    for (int b = 0; b < axes.bins; ++b) {
      wm[b] += h.width_marginal[b];
      hm[b] += h.height_marginal[b];
    }
  }
  const std::size_t max_marginal =
      std::max<std::size_t>({1, *std::max_element(wm.begin(), wm.end()),
                             *std::max_element(hm.begin(), hm.end())});

  const double x0 = kMargin;
  const double y0 = kMarginal + 20;  // top of the main plot
  auto px_x = [&](double log2v) {
    return x0 + (log2v - axes.log2_min) / (axes.log2_max - axes.log2_min) *
                    kPlot;
  };
  auto px_y = [&](double log2v) {
    return y0 + kPlot -
           (log2v - axes.log2_min) / (axes.log2_max - axes.log2_min) * kPlot;
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size
      << "\" height=\"" << size << "\" font-family=\"sans-serif\" "
      << "font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" "
      << "fill=\"white\"/>\n";
  svg << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << kPlot
      << "\" height=\"" << kPlot << "\" fill=\"none\" stroke=\"#333\"/>\n";
  std::size_t color = 0;
  for (const AnchorShapeHistogram& h : dist.anchors) {
    if (!selected(h)) continue;
    const char* fill = kPalette[color++ % std::size(kPalette)];
    svg << "<g class=\"anchor\" data-layer=\"" << h.anchor.layer
        << "\" data-slot=\"" << h.anchor.slot << "\" fill=\"" << fill
        << "\">\n";
    for (const auto& [cell, n] : h.bins) {
      const double opacity = 0.15 + 0.85 * static_cast<double>(n) / max_bin;
      svg << "<rect class=\"bin\" x=\"" << Fixed(x0 + cell.first * bin_px)
          << "\" y=\"" << Fixed(y0 + kPlot - (cell.second + 1) * bin_px)
          << "\" width=\"" << Fixed(bin_px) << "\" height=\"" << Fixed(bin_px)
          << "\" fill-opacity=\"" << Fixed(opacity, 3) << "\"/>\n";
    }
    const double mx = px_x(std::log2(h.default_shape.width()));
    const double my = px_y(std::log2(h.default_shape.height()));
    svg << "<path class=\"default-shape\" d=\"M" << Fixed(mx - 5) << ","
        << Fixed(my) << " H" << Fixed(mx + 5) << " M" << Fixed(mx) << ","
        << Fixed(my - 5) << " V" << Fixed(my + 5) << "\" stroke=\"" << fill
        << "\" stroke-width=\"2\"/>\n</g>\n";
  }
  // Marginals: widths above the plot, heights to its right.
  svg << "<g class=\"marginals\" fill=\"#555\">\n";
  for (int b = 0; b < axes.bins; ++b) {
    const double wh = kMarginal * static_cast<double>(wm[b]) / max_marginal;
    const double hw = kMarginal * static_cast<double>(hm[b]) / max_marginal;
    if (wh > 0) {
      svg << "<rect x=\"" << Fixed(x0 + b * bin_px) << "\" y=\""
          << Fixed(y0 - wh) << "\" width=\"" << Fixed(bin_px) << "\" height=\""
          << Fixed(wh) << "\"/>\n";
    }
    if (hw > 0) {
      svg << "<rect x=\"" << Fixed(x0 + kPlot) << "\" y=\""
          << Fixed(y0 + kPlot - (b + 1) * bin_px) << "\" width=\"" << Fixed(hw)
          << "\" height=\"" << Fixed(bin_px) << "\"/>\n";
    }
  }
  svg << "</g>\n";
  for (int t = static_cast<int>(std::ceil(axes.log2_min));
       t <= static_cast<int>(std::floor(axes.log2_max)); t += 2) {
    const int px = 1 << std::max(0, t);
    svg << "<text x=\"" << Fixed(px_x(t)) << "\" y=\"" << y0 + kPlot + 16
        << "\" text-anchor=\"middle\">" << px << "</text>\n";
    svg << "<text x=\"" << x0 - 6 << "\" y=\"" << Fixed(px_y(t) + 4)
        << "\" text-anchor=\"end\">" << px << "</text>\n";
  }
  svg << "<text x=\"" << x0 + kPlot / 2 << "\" y=\"" << y0 + kPlot + 36
      << "\" text-anchor=\"middle\">box width (px)</text>\n";
  svg << "<text transform=\"translate(16," << y0 + kPlot / 2
      << ") rotate(-90)\" text-anchor=\"middle\">box height (px)</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

std::string RunManifest::ToJson() const {
  OrderedJson j;
  j["tool"] = "anchorprune";
  j["version"] = tool_version;
  j["command"] = command;
  auto files = [](const std::vector<ManifestFile>& list) {
    OrderedJson a = OrderedJson::array();
    for (const ManifestFile& f : list) {
      a.push_back({{"role", f.role}, {"path", f.path}, {"sha256", f.sha256}});
    }
    return a;
  };
  j["inputs"] = files(inputs);
  OrderedJson p = OrderedJson::object();
  for (const auto& [k, v] : params) p[k] = v;
  j["params"] = std::move(p);
  j["outputs"] = files(outputs);
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;
  return j.dump(2) + "\n";
}

}  // namespace anchorprune
