#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "atlab/dataset.hpp"
#include "atlab/model.hpp"

namespace atlab {

enum class TransformKind { pixel_average, colored_contour, grid_tile };
enum class ContourColor { white, red, green, blue };

const char* contour_color_name(ContourColor c);
// Saturated channel values in [0,1]: white=(1,1,1), red=(1,0,0), ...
std::array<float, 3> contour_color_rgb(ContourColor c);

struct TransformSpec {
    TransformKind kind = TransformKind::pixel_average;
    ContourColor color = ContourColor::white;  // contour only
    int thickness = 1;                         // contour only
    // grid tiling fixed at 2x2 of 4 copies

    std::string name() const;
};

// Every pixel of each channel set to that channel's mean over the image:
// a monochromatic image preserving the average color. Idempotent.
Dataset pixel_average(const Dataset& ds);

// Pixels within `thickness` of any border set to the color; the interior
// (H-2t) x (W-2t) pixels are bit-identical to the input. Requires
// 1 <= thickness < min(H,W)/2 and a 3-channel dataset.
Dataset colored_contour(const Dataset& ds, ContourColor color, int thickness);

// 2H x 2W output holding 4 bit-identical copies of the input, arranged 2x2.
Dataset grid_tile(const Dataset& ds);

Dataset apply_transform(const Dataset& ds, const TransformSpec& spec);

// Bilinear resize (used as the grid fallback for fixed-input models).
Dataset resize_bilinear(const Dataset& ds, int out_h, int out_w);

enum class GridPolicy { native, resize };

struct BiasContourRow {
    int thickness = 0;
    double mean_drop = 0.0;  // averaged over the 4 colors
    double sd_drop = 0.0;    // population sd over the 4 colors
    std::array<double, 4> per_color_drop{};  // indexed by ContourColor order
    std::array<double, 4> per_color_accuracy{};
};

struct BiasReport {
    double clean_accuracy = 0.0;
    std::optional<double> pixel_average_accuracy;
    std::vector<BiasContourRow> contours;
    std::optional<double> grid_accuracy;
    GridPolicy grid_policy = GridPolicy::native;

    double pixel_average_drop() const { return clean_accuracy - *pixel_average_accuracy; }
    double grid_drop() const { return clean_accuracy - *grid_accuracy; }
};

struct BiasProbeOptions {
    std::vector<int> thicknesses = {1, 2, 3, 4};
    bool include_pixel_average = true;
    bool include_grid = true;
    GridPolicy grid_policy = GridPolicy::native;
};

// Drop/mean/sd arithmetic for one thickness: drops against the clean
// baseline, mean over the 4 colors, population sd (divide by 4).
BiasContourRow make_contour_row(int thickness, const std::array<double, 4>& per_color_accuracy,
                                double clean_accuracy);

// Clean baseline plus accuracy drop per transform; contours evaluated over
// all 4 colors per thickness. All transforms preserve labels.
BiasReport bias_report(BlockTappedModel& model, const Dataset& eval_data,
                       const BiasProbeOptions& options);

}  // namespace atlab
