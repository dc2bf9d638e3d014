#include "user_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "error.hpp"
#include "rng.hpp"

namespace mpl {

std::string_view preference_type_name(PreferenceType t) {
    switch (t) {
        case PreferenceType::Aggressive: return "aggressive";
        case PreferenceType::Medium: return "medium";
        case PreferenceType::Reserved: return "reserved";
    }
    return "medium";
}

PreferenceType preference_type_from_name(std::string_view name) {
    for (std::size_t t = 0; t < kPreferenceTypeCount; ++t)
        if (preference_type_name(static_cast<PreferenceType>(t)) == name) return static_cast<PreferenceType>(t);
    throw Error(ErrorCode::Parse, "unknown preference type '" + std::string(name) + "'");
}

void TypeBands::validate() const {
    for (const auto &per_type : bands)
        for (const auto &per_situation : per_type)
            for (const auto &b : per_situation)
                if (!(b.lo >= 0.0 && b.hi <= 1.0 && b.lo <= b.hi))
                    throw Error(ErrorCode::InvalidArgument, "bands must satisfy 0 <= lo <= hi <= 1");
}

TypeBands default_type_bands() {
    using Row = std::array<Band, kBehaviorCount>;
    // Far from obstacles and targets (FF); other situations are derived below.
    const std::array<Row, kPreferenceTypeCount> base = {{
        {{{0.7, 1.0}, {0.7, 0.9}, {0.8, 1.0}, {0.0, 0.3}}},  // aggressive
        {{{0.4, 0.6}, {0.4, 0.6}, {0.4, 0.6}, {0.4, 0.6}}},  // medium
        {{{0.0, 0.3}, {0.1, 0.3}, {0.0, 0.3}, {0.7, 1.0}}},  // reserved
    }};
    TypeBands out;
    for (std::size_t t = 0; t < kPreferenceTypeCount; ++t) {
        for (auto s : kSituations) {
            const bool near_obstacle = s == Situation::TF || s == Situation::TT;
            const bool near_target = s == Situation::FT || s == Situation::TT;
            std::array<double, kBehaviorCount> shift{};
            if (near_target) {
                shift[1] -= 0.2;
                shift[2] -= 0.2;
            }
            if (near_obstacle) {
                shift[3] += 0.2;
                shift[2] -= 0.1;
            }
            for (std::size_t b = 0; b < kBehaviorCount; ++b) {
                Band &band = out.at(static_cast<PreferenceType>(t), s, b);
                band.lo = std::clamp(base[t][b].lo + shift[b], 0.0, 1.0);
                band.hi = std::clamp(base[t][b].hi + shift[b], 0.0, 1.0);
            }
        }
    }
    return out;
}

nlohmann::json bands_to_json(const TypeBands &bands) {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t t = 0; t < kPreferenceTypeCount; ++t) {
        const auto type = static_cast<PreferenceType>(t);
        for (auto s : kSituations)
            for (std::size_t b = 0; b < kBehaviorCount; ++b) {
                const Band &band = bands.at(type, s, b);
                j[std::string(preference_type_name(type))][std::string(situation_name(s))][std::string(kBehaviorNames[b])] =
                    {band.lo, band.hi};
            }
    }
    return j;
}

TypeBands bands_from_json(const nlohmann::json &j) {
    TypeBands out;
    try {
        for (std::size_t t = 0; t < kPreferenceTypeCount; ++t) {
            const auto type = static_cast<PreferenceType>(t);
            const auto &jt = j.at(std::string(preference_type_name(type)));
            for (auto s : kSituations) {
                const auto &js = jt.at(std::string(situation_name(s)));
                for (std::size_t b = 0; b < kBehaviorCount; ++b) {
                    const auto &jb = js.at(std::string(kBehaviorNames[b]));
                    if (!jb.is_array() || jb.size() != 2) throw Error(ErrorCode::Parse, "band must be [lo, hi]");
                    out.at(type, s, b) = {jb[0].get<double>(), jb[1].get<double>()};
                }
            }
        }
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorCode::Parse, std::string("bands: ") + e.what());
    }
    out.validate();
    return out;
}

TypeBands load_bands(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open bands file '" + path + "'");
    try {
        return bands_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorCode::Parse, "bands file '" + path + "': " + e.what());
    }
}

std::vector<UserProfile> generate_population(std::size_t n, const TypeBands &bands, std::uint64_t seed) {
    bands.validate();
    std::vector<UserProfile> users(n);
    for (std::size_t id = 0; id < n; ++id) {
        UserProfile &u = users[id];
        u.id = id;
        u.ptype = static_cast<PreferenceType>(id % kPreferenceTypeCount);
        // Per-user stream so any shard of ids can be generated independently.
        Rng rng(derive_seed(seed, 0x75736572, id));
        std::array<double, kBehaviorCount> quantile{};
        for (auto &q : quantile) q = rng.uniform();
        for (auto s : kSituations)
            for (std::size_t b = 0; b < kBehaviorCount; ++b) {
                const Band &band = bands.at(u.ptype, s, b);
                u.targets[static_cast<std::size_t>(s)][b] = band.lo + quantile[b] * (band.hi - band.lo);
            }
    }
    return users;
}

Instruction instruct(const PreferenceVector &target, const PreferenceVector &observed) {
    Instruction ins;
    for (std::size_t b = 0; b < kBehaviorCount; ++b) {
        const double d = target[b] - observed[b];
        if (d > kInstructionDeadBand)
            ins[b] = 1;
        else if (std::abs(d) <= kInstructionDeadBand)
            ins[b] = 0;
        else
            ins[b] = -1;
    }
    return ins;
}

Instruction instruct(const UserProfile &user, const SituationContext &situation, const PreferenceVector &observed) {
    return instruct(user.target(situation.situation()), observed);
}

bool is_satisfied(const UserProfile &user, const SituationContext &situation, const PreferenceVector &observed) {
    return instruct(user, situation, observed).is_zero();
}

nlohmann::ordered_json user_to_json(const UserProfile &user) {
    nlohmann::ordered_json targets = nlohmann::ordered_json::object();
    for (auto s : kSituations) {
        nlohmann::ordered_json t = nlohmann::ordered_json::object();
        for (std::size_t b = 0; b < kBehaviorCount; ++b) t[std::string(kBehaviorNames[b])] = user.target(s)[b];
        targets[std::string(situation_name(s))] = std::move(t);
    }
    nlohmann::ordered_json j;
    j["id"] = user.id;
    j["ptype"] = preference_type_name(user.ptype);
    j["targets"] = std::move(targets);
    return j;
}

UserProfile user_from_json(const nlohmann::json &j) {
    UserProfile u;
    try {
        u.id = j.at("id").get<std::uint64_t>();
        u.ptype = preference_type_from_name(j.at("ptype").get<std::string>());
        const auto &targets = j.at("targets");
        for (auto s : kSituations) {
            const auto &t = targets.at(std::string(situation_name(s)));
            for (std::size_t b = 0; b < kBehaviorCount; ++b) {
                const double v = t.at(std::string(kBehaviorNames[b])).get<double>();
                if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::Parse, "user target outside [0,1]");
                u.targets[static_cast<std::size_t>(s)][b] = v;
            }
        }
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorCode::Parse, std::string("user profile: ") + e.what());
    }
    return u;
}

void save_population(const std::vector<UserProfile> &users, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write population '" + path + "'");
    for (const auto &u : users) out << user_to_json(u).dump() << '\n';
    if (!out) throw Error(ErrorCode::Io, "failed writing population '" + path + "'");
}

std::vector<UserProfile> load_population(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open population '" + path + "'");
    std::vector<UserProfile> users;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            users.push_back(user_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception &e) {
            throw Error(ErrorCode::Parse, path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (users.empty()) throw Error(ErrorCode::Parse, "population '" + path + "' is empty");
    return users;
}

std::array<std::size_t, kPreferenceTypeCount> type_counts(const std::vector<UserProfile> &users) {
    std::array<std::size_t, kPreferenceTypeCount> counts{};
    for (const auto &u : users) ++counts[static_cast<std::size_t>(u.ptype)];
    return counts;
}

}  // namespace mpl
