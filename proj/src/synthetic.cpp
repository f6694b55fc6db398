#include "proxystream/csv.hpp"
#include "proxystream/ingestion.hpp"
#include "proxystream/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace proxystream {

namespace {

// Split parts and invoice timestamps live on dyadic grids so that sums and differences are exact.
constexpr double kSpendGrid = 128.0;
constexpr double kTimeGrid = 1024.0;

double floor_to_grid(double x, double grid) { return std::floor(x * grid) / grid; }
double round_to_grid(double x, double grid) { return std::round(x * grid) / grid; }

std::string padded(const char* prefix, std::size_t i, int width = 6) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%0*zu", prefix, width, i);
    return buf;
}

std::vector<std::string> shopper_labels(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(padded("visit_", i, 2));
    return out;
}

const char* kVci = "Vendor creates invoice";
const char* kRir = "Record Invoice Receipt";
const char* kClear = "Clear Invoice";

std::vector<std::string> invoice_prefix_labels(std::size_t n_labels) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i + 3 < n_labels; ++i) out.push_back(padded("Activity ", i + 1, 2));
    return out;
}

std::vector<std::size_t> invoice_category_counts() { return {3, 3, 2, 2, 3, 5, 21, 4}; }

ShopperArchetype derive_shopper_archetype(Rng& rng, const SyntheticSpec& spec) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double horizon = static_cast<double>(std::max<std::size_t>(spec.horizon, 1));
    ShopperArchetype a;
    a.spend_intercept = 30.0 + 120.0 * u01(rng);
    a.spend_slope = a.spend_intercept * (u01(rng) - 0.5) / horizon;
    a.spread = spec.entity_spread;
    a.visits_per_week = 1 + static_cast<int>(std::floor(4.0 * u01(rng)));
    a.label_weights.assign(spec.n_labels, 0.1);
    if (!a.label_weights.empty()) {
        a.label_weights[static_cast<std::size_t>(u01(rng) * static_cast<double>(spec.n_labels)) % spec.n_labels] += 2.0;
        a.label_weights[static_cast<std::size_t>(u01(rng) * static_cast<double>(spec.n_labels)) % spec.n_labels] += 1.0;
    }
    a.freshness = 0.2 + 0.6 * u01(rng);
    a.freshness_slope = 0.4 * (u01(rng) - 0.5) / horizon;
    a.item_value = 1.5 + 4.5 * u01(rng);
    a.item_value_slope = 0.6 * (u01(rng) - 0.5) * a.item_value / horizon;
    a.product_density = 1.0 + 2.0 * u01(rng);
    return a;
}

InvoiceArchetype derive_invoice_archetype(Rng& rng, const SyntheticSpec& spec) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    InvoiceArchetype a;
    a.duration_mean = 3.0 + 37.0 * u01(rng);
    for (auto n : invoice_category_counts()) {
        std::vector<double> w(n, 0.15 / static_cast<double>(n - 1));
        w[static_cast<std::size_t>(u01(rng) * static_cast<double>(n)) % n] = 0.85;
        a.attribute_weights.push_back(std::move(w));
    }
    const auto n_prefix = invoice_prefix_labels(spec.n_labels).size();
    a.label_weights.assign(n_prefix, 0.05);
    for (double boost : {3.0, 2.0, 1.0})
        if (n_prefix) a.label_weights[static_cast<std::size_t>(u01(rng) * static_cast<double>(n_prefix)) % n_prefix] += boost;
    a.prefix_mean_length = 2.0 + 4.0 * u01(rng);
    return a;
}

std::vector<double> vector_from(const nlohmann::json& j, const char* key, std::vector<double> fallback) {
    return j.contains(key) ? j.at(key).get<std::vector<double>>() : std::move(fallback);
}

}  // namespace

const std::vector<std::string>& shopper_attribute_names() {
    static const std::vector<std::string> names{"freshness", "item_value", "product_density", "total_value",
                                                "total_item_count"};
    return names;
}

AttributeSchema shopper_event_schema() {
    std::vector<AttributeSpec> specs;
    for (const auto& n : shopper_attribute_names()) specs.push_back({n, AttributeKind::numeric, {}});
    return AttributeSchema(std::move(specs));
}

AttributeSchema synthetic_invoice_schema() {
    const auto& names = invoice_attribute_names();
    std::vector<AttributeSpec> specs;
    const std::vector<std::vector<std::string>> cats{
        {"Company 1", "Company 2", "Company 3"},
        {"EC Purchase order", "Framework order", "Standard PO"},
        {},
        {},
        {"2-way match", "3-way match, invoice after GR", "3-way match, invoice before GR"},
        {"Consignment", "Service", "Standard", "Subcontracting", "Third-party"},
        {},
        {"NPR", "OTHER", "PR", "Unknown"}};
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i == 2 || i == 3) {
            specs.push_back({names[i], AttributeKind::boolean, {}});
        } else if (i == 6) {
            std::vector<std::string> areas;
            for (std::size_t k = 1; k <= 21; ++k) areas.push_back(padded("Area ", k, 2));
            specs.push_back({names[i], AttributeKind::categorical, std::move(areas)});
        } else {
            specs.push_back({names[i], AttributeKind::categorical, cats[i]});
        }
    }
    return AttributeSchema(std::move(specs));
}

void SyntheticSpec::validate() const {
    if (!(noise_scale >= 0.0)) throw std::invalid_argument("noise_scale must be >= 0");
    if (n_archetypes == 0) throw std::invalid_argument("n_archetypes must be >= 1");
    if (horizon == 0) throw std::invalid_argument("horizon must be >= 1");
    if (!(entity_spread >= 0.0)) throw std::invalid_argument("entity_spread must be >= 0");
    if (attribute_noise && !(*attribute_noise >= 0.0)) throw std::invalid_argument("attribute_noise must be >= 0");
    if (!(start_spread >= 0.0)) throw std::invalid_argument("start_spread must be >= 0");
    const bool counted = flavor == SyntheticFlavor::shopper || arrival_rate == 0.0;
    if (counted && n_archetypes > n_entities) throw std::invalid_argument("n_archetypes must not exceed n_entities");
    if (arrival_rate < 0.0) throw std::invalid_argument("arrival_rate must be >= 0");
    if (flavor == SyntheticFlavor::shopper) {
        if (n_labels == 0) throw std::invalid_argument("n_labels must be >= 1");
        if (visit_rate && *visit_rate < 1) throw std::invalid_argument("visit_rate must be >= 1");
        if (!shopper_archetypes.empty() && shopper_archetypes.size() != n_archetypes)
            throw std::invalid_argument("archetype list size differs from n_archetypes");
        for (const auto& a : shopper_archetypes) {
            if (a.label_weights.size() != n_labels) throw std::invalid_argument("label_weights size != n_labels");
            if (a.visits_per_week < 1) throw std::invalid_argument("visits_per_week must be >= 1");
            if (!(a.weight > 0)) throw std::invalid_argument("archetype weight must be > 0");
        }
    } else {
        if (n_labels < 4) throw std::invalid_argument("invoice streams need n_labels >= 4");
        if (horizon > 200) throw std::invalid_argument("invoice horizon must stay within one year (<= 200 days)");
        if (!invoice_archetypes.empty() && invoice_archetypes.size() != n_archetypes)
            throw std::invalid_argument("archetype list size differs from n_archetypes");
        const auto counts = invoice_category_counts();
        for (const auto& a : invoice_archetypes) {
            if (!(a.duration_mean > 0)) throw std::invalid_argument("duration_mean must be > 0");
            if (a.attribute_weights.size() != counts.size())
                throw std::invalid_argument("attribute_weights must cover the eight invoice attributes");
            for (std::size_t i = 0; i < counts.size(); ++i)
                if (a.attribute_weights[i].size() != counts[i])
                    throw std::invalid_argument("attribute_weights size mismatch for " + invoice_attribute_names()[i]);
            if (a.label_weights.size() != n_labels - 3) throw std::invalid_argument("label_weights size != n_labels - 3");
        }
    }
}

SyntheticSpec synthetic_preset(std::string_view name) {
    SyntheticSpec s;
    if (name == "shopper_default") {
        s.flavor = SyntheticFlavor::shopper;
        s.n_entities = 5000;
        s.n_archetypes = 5;
        s.horizon = 25;
        s.noise_scale = 0.25;
        s.entity_spread = 0.3;
    } else if (name == "shopper_noisy") {
        s.flavor = SyntheticFlavor::shopper;
        // Archetypes share visit pattern and labels and differ through attributes that all move with
        // one index, while spend is not monotone in that index. Attributes carry the same per-entity
        // noise as spend, so no single shopper pins down its archetype.
        s.n_entities = 2000;
        s.n_archetypes = 5;
        s.horizon = 20;
        s.noise_scale = 0.5;
        s.entity_spread = 0.05;
        s.n_labels = 1;
        const double spend[] = {120.0, 40.0, 100.0, 60.0, 80.0};
        for (int u = 0; u < 5; ++u) {
            ShopperArchetype a;
            a.spend_intercept = spend[u];
            a.spread = s.entity_spread;
            a.visits_per_week = 2;
            a.label_weights = {1.0};
            a.freshness = 0.2 + 0.15 * u;
            a.item_value = 2.0 + 0.5 * u;
            a.product_density = 1.0 + 0.25 * u;
            s.shopper_archetypes.push_back(a);
        }
    } else if (name == "invoice_default") {
        s.flavor = SyntheticFlavor::invoice;
        s.n_entities = 2000;
        s.n_archetypes = 5;
        s.horizon = 60;
        s.noise_scale = 0.15;
        s.n_labels = 40;
    } else {
        throw std::invalid_argument("unknown generator preset '" + std::string(name) + "'");
    }
    return s;
}

SyntheticSpec SyntheticSpec::from_json(const nlohmann::json& j) {
    SyntheticSpec s;
    if (j.contains("preset")) s = synthetic_preset(j.at("preset").get<std::string>());
    if (j.contains("flavor")) {
        const auto f = j.at("flavor").get<std::string>();
        if (f == "shopper")
            s.flavor = SyntheticFlavor::shopper;
        else if (f == "invoice")
            s.flavor = SyntheticFlavor::invoice;
        else
            throw std::invalid_argument("unknown flavor '" + f + "'");
        if (!j.contains("preset") && !j.contains("n_labels")) s.n_labels = s.flavor == SyntheticFlavor::invoice ? 40 : 8;
    }
    s.n_entities = j.value("n_entities", s.n_entities);
    s.n_archetypes = j.value("n_archetypes", s.n_archetypes);
    s.noise_scale = j.value("noise_scale", s.noise_scale);
    s.horizon = j.value("horizon", s.horizon);
    s.seed = j.value("seed", s.seed);
    s.n_labels = j.value("n_labels", s.n_labels);
    s.poisson_visits = j.value("poisson_visits", s.poisson_visits);
    s.start_spread = j.value("start_spread", s.start_spread);
    if (j.contains("visit_rate")) s.visit_rate = j.at("visit_rate").get<int>();
    s.entity_spread = j.value("entity_spread", s.entity_spread);
    if (j.contains("attribute_noise")) s.attribute_noise = j.at("attribute_noise").get<double>();
    s.arrival_rate = j.value("arrival_rate", s.arrival_rate);
    if (j.contains("archetypes")) {
        const auto& arr = j.at("archetypes");
        if (s.flavor == SyntheticFlavor::shopper) {
            s.shopper_archetypes.clear();
            for (const auto& a : arr) {
                ShopperArchetype x;
                x.weight = a.value("weight", x.weight);
                x.spend_intercept = a.value("spend_intercept", x.spend_intercept);
                x.spend_slope = a.value("spend_slope", x.spend_slope);
                x.spread = a.value("spread", s.entity_spread);
                x.visits_per_week = a.value("visits_per_week", x.visits_per_week);
                x.label_weights = vector_from(a, "label_weights", std::vector<double>(s.n_labels, 1.0));
                x.freshness = a.value("freshness", x.freshness);
                x.freshness_slope = a.value("freshness_slope", x.freshness_slope);
                x.item_value = a.value("item_value", x.item_value);
                x.item_value_slope = a.value("item_value_slope", x.item_value_slope);
                x.product_density = a.value("product_density", x.product_density);
                s.shopper_archetypes.push_back(std::move(x));
            }
        } else {
            s.invoice_archetypes.clear();
            for (const auto& a : arr) {
                InvoiceArchetype x;
                x.weight = a.value("weight", x.weight);
                x.duration_mean = a.value("duration_mean", x.duration_mean);
                x.attribute_weights = a.at("attribute_weights").get<std::vector<std::vector<double>>>();
                x.label_weights = vector_from(a, "label_weights", std::vector<double>(s.n_labels - 3, 1.0));
                x.prefix_mean_length = a.value("prefix_mean_length", x.prefix_mean_length);
                s.invoice_archetypes.push_back(std::move(x));
            }
        }
        s.n_archetypes = j.value("n_archetypes", arr.size());
    }
    s.validate();
    return s;
}

std::pair<EventStore, GroundTruth> generate_shopper_stream(const SyntheticSpec& spec) {
    spec.validate();
    if (spec.flavor != SyntheticFlavor::shopper) throw std::invalid_argument("spec is not a shopper spec");

    std::vector<ShopperArchetype> archetypes = spec.shopper_archetypes;
    if (archetypes.empty()) {
        Rng arch_rng(derive_seed(spec.seed, {10}));
        for (std::size_t a = 0; a < spec.n_archetypes; ++a)
            archetypes.push_back(derive_shopper_archetype(arch_rng, spec));
    }
    if (spec.visit_rate)
        for (auto& a : archetypes) a.visits_per_week = *spec.visit_rate;

    std::vector<double> weights;
    for (const auto& a : archetypes) weights.push_back(a.weight);
    std::discrete_distribution<std::size_t> pick_archetype(weights.begin(), weights.end());
    std::vector<std::discrete_distribution<std::size_t>> pick_label;
    for (const auto& a : archetypes) pick_label.emplace_back(a.label_weights.begin(), a.label_weights.end());

    Rng rng(derive_seed(spec.seed, {20}));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    const auto labels = shopper_labels(spec.n_labels);
    EventStoreBuilder builder;
    builder.set_alphabet(labels).set_event_schema(shopper_event_schema());
    builder.set_calendar({csv::epoch_seconds(2018, 1, 1), 7 * 86400.0});

    GroundTruth truth;
    truth.archetype.resize(spec.n_entities);
    truth.weekly_spend.assign(spec.n_entities, std::vector<double>(spec.horizon, 0.0));
    const double sigma = spec.noise_scale;
    const double attr_sigma = spec.attribute_noise.value_or(sigma);

    for (std::size_t c = 0; c < spec.n_entities; ++c) {
        const auto name = padded("S", c + 1);
        builder.add_entity(name);
        const std::size_t a_idx = pick_archetype(rng);
        const auto& a = archetypes[a_idx];
        truth.archetype[c] = a_idx;
        const double level = std::max(0.05, 1.0 + a.spread * gauss(rng));
        const auto start_week = static_cast<std::size_t>(std::floor(spec.start_spread * u01(rng)));

        for (std::size_t w = start_week; w < spec.horizon; ++w) {
            const double week = static_cast<double>(w);
            int visits = a.visits_per_week;
            if (spec.poisson_visits) visits = std::poisson_distribution<int>(a.visits_per_week)(rng);
            const double noise = sigma * a.spend_intercept * gauss(rng);
            if (visits == 0) continue;
            const double spend = std::max(0.0, level * (a.spend_intercept + a.spend_slope * week) + noise);

            std::vector<double> share(static_cast<std::size_t>(visits));
            double share_sum = 0;
            for (auto& s : share) share_sum += (s = 0.5 + u01(rng));
            double assigned = 0;
            double last = 0;
            for (int j = 0; j < visits; ++j) {
                double value;
                if (j + 1 < visits) {
                    value = floor_to_grid(spend * share[static_cast<std::size_t>(j)] / share_sum, kSpendGrid);
                    assigned += value;
                } else {
                    value = last = spend - assigned;
                }
                double t = week + (static_cast<double>(j) + u01(rng)) / static_cast<double>(visits);
                if (t >= week + 1.0) t = std::nextafter(week + 1.0, 0.0);
                const double fresh =
                    std::clamp(a.freshness + a.freshness_slope * week + 0.1 * attr_sigma * gauss(rng), 0.0, 1.0);
                const double item_value =
                    std::max(0.05, a.item_value + a.item_value_slope * week + 0.2 * attr_sigma * a.item_value * gauss(rng));
                const double density = std::max(0.05, a.product_density * (1.0 + 0.2 * attr_sigma * gauss(rng)));
                const double items = std::max(1.0, std::round(value / item_value));
                builder.add_event(name, labels[pick_label[a_idx](rng)], t, {fresh, item_value, density, value, items});
            }
            // Same left-to-right order the encoder uses when it sums a week.
            truth.weekly_spend[c][w] = assigned + last;
        }
    }
    return {std::move(builder).build(), std::move(truth)};
}

std::pair<EventStore, GroundTruth> generate_invoice_stream(const SyntheticSpec& spec) {
    spec.validate();
    if (spec.flavor != SyntheticFlavor::invoice) throw std::invalid_argument("spec is not an invoice spec");

    std::vector<InvoiceArchetype> archetypes = spec.invoice_archetypes;
    if (archetypes.empty()) {
        Rng arch_rng(derive_seed(spec.seed, {11}));
        for (std::size_t a = 0; a < spec.n_archetypes; ++a)
            archetypes.push_back(derive_invoice_archetype(arch_rng, spec));
    }

    Rng rng(derive_seed(spec.seed, {21}));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double horizon = static_cast<double>(spec.horizon);

    std::vector<double> arrivals;
    if (spec.arrival_rate > 0) {
        std::exponential_distribution<double> gap(spec.arrival_rate);
        for (double t = gap(rng); t < horizon; t += gap(rng)) arrivals.push_back(t);
    } else {
        for (std::size_t i = 0; i < spec.n_entities; ++i) arrivals.push_back(horizon * u01(rng));
        std::sort(arrivals.begin(), arrivals.end());
    }

    std::vector<double> weights;
    for (const auto& a : archetypes) weights.push_back(a.weight);
    std::discrete_distribution<std::size_t> pick_archetype(weights.begin(), weights.end());

    const auto prefix_labels = invoice_prefix_labels(spec.n_labels);
    std::vector<std::string> alphabet = prefix_labels;
    alphabet.insert(alphabet.end(), {kVci, kRir, kClear});
    std::sort(alphabet.begin(), alphabet.end());

    EventStoreBuilder builder;
    builder.set_alphabet(alphabet).set_entity_schema(synthetic_invoice_schema());
    builder.set_calendar({csv::epoch_seconds(2018, 1, 1), 86400.0});
    const auto schema = synthetic_invoice_schema();

    GroundTruth truth;
    const std::size_t n = arrivals.size();
    truth.archetype.resize(n);
    truth.vci.resize(n);
    truth.rir.resize(n);
    truth.duration.resize(n);

    for (std::size_t c = 0; c < n; ++c) {
        const auto name = padded("INV", c + 1);
        const std::size_t a_idx = pick_archetype(rng);
        const auto& a = archetypes[a_idx];
        truth.archetype[c] = a_idx;

        std::vector<double> attrs;
        for (std::size_t i = 0; i < a.attribute_weights.size(); ++i) {
            const auto& w = a.attribute_weights[i];
            attrs.push_back(static_cast<double>(std::discrete_distribution<std::size_t>(w.begin(), w.end())(rng)));
        }
        schema.validate(attrs);
        builder.add_entity(name, std::move(attrs));

        std::discrete_distribution<std::size_t> pick_label(a.label_weights.begin(), a.label_weights.end());
        const int prefix_len = std::poisson_distribution<int>(a.prefix_mean_length)(rng);
        double t = round_to_grid(arrivals[c], kTimeGrid);
        for (int k = 0; k < prefix_len; ++k) {
            builder.add_event(name, prefix_labels[pick_label(rng)], t);
            t = round_to_grid(t + 0.01 + 0.3 * u01(rng), kTimeGrid);
        }
        const double vci = t;
        double duration = a.duration_mean * std::max(0.05, 1.0 + spec.noise_scale * gauss(rng));
        duration = std::max(round_to_grid(std::min(duration, 355.0 - vci), kTimeGrid), 1.0 / kTimeGrid);
        const double rir = vci + duration;
        builder.add_event(name, kVci, vci);
        const int middle = static_cast<int>(std::floor(3.0 * u01(rng)));
        for (int k = 0; k < middle; ++k) {
            const double tm = round_to_grid(vci + duration * u01(rng), kTimeGrid);
            builder.add_event(name, prefix_labels[pick_label(rng)], std::min(tm, rir));
        }
        builder.add_event(name, kRir, rir);
        builder.add_event(name, kClear, round_to_grid(rir + 2.0 * u01(rng), kTimeGrid));

        truth.vci[c] = vci;
        truth.rir[c] = rir;
        truth.duration[c] = rir - vci;
    }
    return {std::move(builder).build(), std::move(truth)};
}

void write_ground_truth(const EventStore& store, const GroundTruth& truth, SyntheticFlavor flavor,
                        std::ostream& out) {
    if (flavor == SyntheticFlavor::shopper) {
        out << "entity_id,archetype,week,spend\n";
        for (std::size_t c = 0; c < truth.weekly_spend.size(); ++c)
            for (std::size_t w = 0; w < truth.weekly_spend[c].size(); ++w)
                out << store.entity_name(static_cast<EntityId>(c)) << ',' << truth.archetype[c] << ',' << w << ','
                    << csv::format_double(truth.weekly_spend[c][w]) << '\n';
    } else {
        out << "entity_id,archetype,vci,rir,duration\n";
        for (std::size_t c = 0; c < truth.duration.size(); ++c)
            out << store.entity_name(static_cast<EntityId>(c)) << ',' << truth.archetype[c] << ','
                << csv::format_double(truth.vci[c]) << ',' << csv::format_double(truth.rir[c]) << ','
                << csv::format_double(truth.duration[c]) << '\n';
    }
}

}  // namespace proxystream
