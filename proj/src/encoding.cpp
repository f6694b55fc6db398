#include "proxystream/encoding.hpp"

#include "proxystream/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace proxystream {

namespace {

struct ShopperColumns {
    std::size_t freshness, item_value, density, total_value, item_count;
};

ShopperColumns shopper_columns(const EventStore& store) {
    const auto& schema = store.event_schema();
    auto need = [&](const char* name) {
        auto idx = schema.index_of(name);
        if (!idx) throw SchemaError(std::string("event attribute '") + name + "' is required for journeys");
        return *idx;
    };
    return {need("freshness"), need("item_value"), need("product_density"), need("total_value"),
            need("total_item_count")};
}

bool equal_ci(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i])))
            return false;
    return true;
}

}  // namespace

JourneyMatrix encode_journey(const EventStore& store, EntityId c, double journey_end, std::size_t tau) {
    const auto cols = shopper_columns(store);
    const std::size_t n_labels = store.alphabet().size();
    JourneyMatrix m(kJourneyAggregateRows + n_labels, tau);
    for (std::size_t j = 0; j < tau; ++j) {
        const double start = journey_end - static_cast<double>(tau - j);
        const auto week = entity_slice(store, TimeWindow(start, start + 1.0), c);
        if (week.empty()) continue;
        double fresh = 0, value = 0, density = 0, total = 0, items = 0;
        for (const Event* e : week) {
            fresh += e->attributes[cols.freshness];
            value += e->attributes[cols.item_value];
            density += e->attributes[cols.density];
            total += e->attributes[cols.total_value];
            items += e->attributes[cols.item_count];
        }
        const auto n = static_cast<double>(week.size());
        m.at(0, j) = fresh / n;
        m.at(1, j) = value / n;
        m.at(2, j) = density / n;
        m.at(3, j) = total;
        m.at(4, j) = items;
        m.at(5, j) = n;
        const auto freqs = parikh(week, n_labels);
        for (std::size_t a = 0; a < n_labels; ++a) m.at(kJourneyAggregateRows + a, j) = freqs[a];
    }
    return m;
}

double shopper_outcome(const EventStore& store, EntityId c, TimeWindow window) {
    const auto col = shopper_columns(store).total_value;
    double total = 0;
    for (const Event* e : entity_slice(store, window, c)) total += e->attributes[col];
    return total;
}

std::vector<double> LinearFitCoeffs::flat() const {
    std::vector<double> out;
    out.reserve(3 * slope.size());
    for (std::size_t v = 0; v < slope.size(); ++v) {
        out.push_back(slope[v]);
        out.push_back(intercept[v]);
        out.push_back(residual[v]);
    }
    return out;
}

LinearFitCoeffs linear_fit(const JourneyMatrix& matrix) {
    const std::size_t tau = matrix.tau();
    if (tau < 2) throw std::invalid_argument("linear fit needs a journey of at least two weeks");
    const double n = static_cast<double>(tau);
    const double x_mean = (n - 1.0) / 2.0;
    double sxx = 0;
    for (std::size_t j = 0; j < tau; ++j) sxx += (static_cast<double>(j) - x_mean) * (static_cast<double>(j) - x_mean);

    LinearFitCoeffs fit;
    const std::size_t rows = matrix.rows();
    fit.slope.resize(rows);
    fit.intercept.resize(rows);
    fit.residual.resize(rows);
    for (std::size_t v = 0; v < rows; ++v) {
        double y_mean = 0;
        for (std::size_t j = 0; j < tau; ++j) y_mean += matrix.at(v, j);
        y_mean /= n;
        double sxy = 0;
        for (std::size_t j = 0; j < tau; ++j) sxy += (static_cast<double>(j) - x_mean) * (matrix.at(v, j) - y_mean);
        const double a = sxy / sxx;
        const double b = y_mean - a * x_mean;
        double sse = 0;
        for (std::size_t j = 0; j < tau; ++j) {
            const double r = matrix.at(v, j) - (a * static_cast<double>(j) + b);
            sse += r * r;
        }
        fit.slope[v] = a;
        fit.intercept[v] = b;
        fit.residual[v] = std::sqrt(sse / n);
    }
    return fit;
}

InvoiceMarkers resolve_invoice_markers(const EventStore& store, std::string_view vci_label,
                                       std::string_view rir_label) {
    std::optional<ActivityId> vci, rir;
    const auto& alphabet = store.alphabet();
    for (std::size_t a = 0; a < alphabet.size(); ++a) {
        if (!vci && equal_ci(alphabet[a], vci_label)) vci = static_cast<ActivityId>(a);
        if (!rir && equal_ci(alphabet[a], rir_label)) rir = static_cast<ActivityId>(a);
    }
    if (!vci) throw SchemaError("alphabet has no '" + std::string(vci_label) + "' label");
    if (!rir) throw SchemaError("alphabet has no '" + std::string(rir_label) + "' label");
    return {*vci, *rir};
}

std::optional<double> first_occurrence(const EventStore& store, EntityId c, ActivityId activity) {
    const auto events = store.events();
    for (auto p : store.entity_event_positions(c))
        if (events[p].activity == activity) return events[p].time;
    return std::nullopt;
}

InvoiceFeatures encode_invoice(const EventStore& store, EntityId c, const InvoiceMarkers& markers) {
    const auto vci = first_occurrence(store, c, markers.vci);
    if (!vci) throw ContractError("invoice '" + store.entity_name(c) + "' has no VCI event");
    InvoiceFeatures f;
    const auto events = store.events();
    std::vector<const Event*> prefix;
    for (auto p : store.entity_event_positions(c)) {
        if (events[p].time >= *vci) break;
        prefix.push_back(&events[p]);
    }
    f.activity_freqs = parikh(prefix, store.alphabet().size());
    const auto attrs = store.entity_attributes(c);
    f.attributes.assign(attrs.begin(), attrs.end());
    return f;
}

double invoice_outcome(const EventStore& store, EntityId c, const InvoiceMarkers& markers) {
    const auto vci = first_occurrence(store, c, markers.vci);
    const auto rir = first_occurrence(store, c, markers.rir);
    if (!vci || !rir || !(*vci < *rir))
        throw ContractError("invoice '" + store.entity_name(c) + "' lacks an ordered VCI/RIR pair");
    return *rir - *vci;
}

std::size_t one_hot_width(std::size_t alphabet_size, const AttributeSchema& schema) {
    std::size_t width = alphabet_size;
    for (const auto& s : schema.specs()) width += s.kind == AttributeKind::categorical ? s.categories.size() : 1;
    return width;
}

std::vector<double> one_hot_encode(const InvoiceFeatures& features, const AttributeSchema& schema) {
    schema.validate(features.attributes);
    std::vector<double> out(features.activity_freqs);
    out.reserve(one_hot_width(features.activity_freqs.size(), schema));
    for (std::size_t i = 0; i < schema.size(); ++i) {
        const auto& s = schema[i];
        const double v = features.attributes[i];
        if (s.kind == AttributeKind::categorical) {
            const auto start = out.size();
            out.resize(start + s.categories.size(), 0.0);
            out[start + static_cast<std::size_t>(v)] = 1.0;
        } else {
            out.push_back(v);
        }
    }
    return out;
}

std::vector<std::vector<double>> zscore(std::span<const std::vector<double>> rows) {
    std::vector<std::vector<double>> out(rows.begin(), rows.end());
    if (rows.empty()) return out;
    const std::size_t dims = rows.front().size();
    const double n = static_cast<double>(rows.size());
    for (std::size_t d = 0; d < dims; ++d) {
        double mean = 0;
        for (const auto& r : rows) mean += r[d];
        mean /= n;
        double var = 0;
        for (const auto& r : rows) var += (r[d] - mean) * (r[d] - mean);
        const double sd = std::sqrt(var / n);
        for (auto& r : out) r[d] = sd > 1e-12 * (std::abs(mean) + 1.0) ? (r[d] - mean) / sd : 0.0;
    }
    return out;
}

}  // namespace proxystream
