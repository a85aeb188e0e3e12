#include "atlab/transforms.hpp"

#include <algorithm>
#include <cmath>

#include "atlab/errors.hpp"
#include "atlab/trainer.hpp"

namespace atlab {

const char* contour_color_name(ContourColor c) {
    switch (c) {
        case ContourColor::white: return "white";
        case ContourColor::red: return "red";
        case ContourColor::green: return "green";
        case ContourColor::blue: return "blue";
    }
    return "?";
}

std::array<float, 3> contour_color_rgb(ContourColor c) {
    switch (c) {
        case ContourColor::white: return {1.0f, 1.0f, 1.0f};
        case ContourColor::red: return {1.0f, 0.0f, 0.0f};
        case ContourColor::green: return {0.0f, 1.0f, 0.0f};
        case ContourColor::blue: return {0.0f, 0.0f, 1.0f};
    }
    return {0.0f, 0.0f, 0.0f};
}

std::string TransformSpec::name() const {
    switch (kind) {
        case TransformKind::pixel_average: return "pixel_average";
        case TransformKind::colored_contour:
            return std::string("contour_") + contour_color_name(color) + "_t" +
                   std::to_string(thickness);
        case TransformKind::grid_tile: return "grid_tile";
    }
    return "?";
}

Dataset pixel_average(const Dataset& ds) {
    Dataset out = ds;
    const std::int64_t hw = static_cast<std::int64_t>(ds.height) * ds.width;
    for (std::int64_t i = 0; i < ds.size(); ++i) {
        float* img = out.sample(i);
        for (int c = 0; c < ds.channels; ++c) {
            float* plane = img + static_cast<std::int64_t>(c) * hw;
            double acc = 0.0;
            for (std::int64_t j = 0; j < hw; ++j) acc += plane[j];
            const float mean = static_cast<float>(acc / static_cast<double>(hw));
            for (std::int64_t j = 0; j < hw; ++j) plane[j] = mean;
        }
    }
    return out;
}

Dataset colored_contour(const Dataset& ds, ContourColor color, int thickness) {
    if (ds.channels != 3)
        throw ConfigError("colored_contour: requires a 3-channel dataset");
    const int min_side = std::min(ds.height, ds.width);
    if (thickness < 1 || 2 * thickness >= min_side)
        throw ConfigError("colored_contour: thickness " + std::to_string(thickness) +
                          " must satisfy 1 <= t < min(H,W)/2 for " + std::to_string(ds.height) +
                          "x" + std::to_string(ds.width));
    const auto rgb = contour_color_rgb(color);
    Dataset out = ds;
    const std::int64_t hw = static_cast<std::int64_t>(ds.height) * ds.width;
    for (std::int64_t i = 0; i < ds.size(); ++i) {
        float* img = out.sample(i);
        for (int y = 0; y < ds.height; ++y) {
            for (int x = 0; x < ds.width; ++x) {
                const bool border = y < thickness || y >= ds.height - thickness || x < thickness ||
                                    x >= ds.width - thickness;
                if (!border) continue;
                for (int c = 0; c < 3; ++c) img[c * hw + y * ds.width + x] = rgb[static_cast<std::size_t>(c)];
            }
        }
    }
    return out;
}

Dataset grid_tile(const Dataset& ds) {
    Dataset out;
    out.channels = ds.channels;
    out.height = 2 * ds.height;
    out.width = 2 * ds.width;
    out.num_classes = ds.num_classes;
    out.labels = ds.labels;
    out.data.resize(ds.data.size() * 4);
    const std::int64_t hw = static_cast<std::int64_t>(ds.height) * ds.width;
    for (std::int64_t i = 0; i < ds.size(); ++i) {
        const float* src = ds.sample(i);
        float* dst = out.sample(i);
        for (int c = 0; c < ds.channels; ++c) {
            const float* sp = src + static_cast<std::int64_t>(c) * hw;
            float* dp = dst + static_cast<std::int64_t>(c) * 4 * hw;
            for (int y = 0; y < ds.height; ++y) {
                for (int qy = 0; qy < 2; ++qy) {
                    for (int qx = 0; qx < 2; ++qx) {
                        std::copy_n(sp + static_cast<std::int64_t>(y) * ds.width, ds.width,
                                    dp + (static_cast<std::int64_t>(qy) * ds.height + y) * out.width +
                                        qx * ds.width);
                    }
                }
            }
        }
    }
    return out;
}

Dataset apply_transform(const Dataset& ds, const TransformSpec& spec) {
    switch (spec.kind) {
        case TransformKind::pixel_average: return pixel_average(ds);
        case TransformKind::colored_contour: return colored_contour(ds, spec.color, spec.thickness);
        case TransformKind::grid_tile: return grid_tile(ds);
    }
    throw ConfigError("apply_transform: unknown kind");
}

Dataset resize_bilinear(const Dataset& ds, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw ConfigError("resize_bilinear: bad target size");
    Dataset out;
    out.channels = ds.channels;
    out.height = out_h;
    out.width = out_w;
    out.num_classes = ds.num_classes;
    out.labels = ds.labels;
    out.data.resize(static_cast<std::size_t>(ds.size()) * ds.channels * out_h * out_w);
    const double sy = static_cast<double>(ds.height) / out_h;
    const double sx = static_cast<double>(ds.width) / out_w;
    const std::int64_t src_hw = static_cast<std::int64_t>(ds.height) * ds.width;
    const std::int64_t dst_hw = static_cast<std::int64_t>(out_h) * out_w;
    for (std::int64_t i = 0; i < ds.size(); ++i) {
        const float* src = ds.sample(i);
        float* dst = out.data.data() + i * ds.channels * dst_hw;
        for (int c = 0; c < ds.channels; ++c) {
            const float* sp = src + static_cast<std::int64_t>(c) * src_hw;
            float* dp = dst + static_cast<std::int64_t>(c) * dst_hw;
            for (int y = 0; y < out_h; ++y) {
                const double fy = std::max(0.0, (y + 0.5) * sy - 0.5);
                const int y0 = std::min(static_cast<int>(fy), ds.height - 1);
                const int y1 = std::min(y0 + 1, ds.height - 1);
                const double wy = fy - y0;
                for (int x = 0; x < out_w; ++x) {
                    const double fx = std::max(0.0, (x + 0.5) * sx - 0.5);
                    const int x0 = std::min(static_cast<int>(fx), ds.width - 1);
                    const int x1 = std::min(x0 + 1, ds.width - 1);
                    const double wx = fx - x0;
                    const double top = (1.0 - wx) * sp[y0 * ds.width + x0] + wx * sp[y0 * ds.width + x1];
                    const double bot = (1.0 - wx) * sp[y1 * ds.width + x0] + wx * sp[y1 * ds.width + x1];
                    dp[y * out_w + x] = static_cast<float>((1.0 - wy) * top + wy * bot);
                }
            }
        }
    }
    return out;
}

BiasContourRow make_contour_row(int thickness, const std::array<double, 4>& per_color_accuracy,
                                double clean_accuracy) {
    BiasContourRow row;
    row.thickness = thickness;
    row.per_color_accuracy = per_color_accuracy;
    double sum = 0.0;
    for (std::size_t c = 0; c < 4; ++c) {
        row.per_color_drop[c] = clean_accuracy - per_color_accuracy[c];
        sum += row.per_color_drop[c];
    }
    row.mean_drop = sum / 4.0;
    double sq = 0.0;
    for (double d : row.per_color_drop) {
        const double dd = d - row.mean_drop;
        sq += dd * dd;
    }
    row.sd_drop = std::sqrt(sq / 4.0);  // the 4 colors are the whole population
    return row;
}

BiasReport bias_report(BlockTappedModel& model, const Dataset& eval_data,
                       const BiasProbeOptions& options) {
    BiasReport report;
    report.grid_policy = options.grid_policy;
    report.clean_accuracy = evaluate_natural(model, eval_data);

    if (options.include_pixel_average) {
        const Dataset avg = pixel_average(eval_data);
        report.pixel_average_accuracy = evaluate_natural(model, avg);
    }

    static constexpr ContourColor kColors[4] = {ContourColor::white, ContourColor::red,
                                                ContourColor::green, ContourColor::blue};
    for (int t : options.thicknesses) {
        std::array<double, 4> acc{};
        for (int ci = 0; ci < 4; ++ci) {
            const Dataset transformed = colored_contour(eval_data, kColors[ci], t);
            acc[static_cast<std::size_t>(ci)] = evaluate_natural(model, transformed);
        }
        report.contours.push_back(make_contour_row(t, acc, report.clean_accuracy));
    }

    if (options.include_grid) {
        Dataset grid = grid_tile(eval_data);
        if (options.grid_policy == GridPolicy::resize)
            grid = resize_bilinear(grid, model.arch.in_h, model.arch.in_w);
        report.grid_accuracy = evaluate_natural(model, grid);
    }
    return report;
}

}  // namespace atlab
