#include "defaff/affordance.hpp"

#include "defaff/targets.hpp"

namespace defaff::afford {

using percept::GridCoord;
using percept::Observation;

int AffordanceMap::argmax_index() const {
    int best = -1;
    double best_s = 0.0;
    for (int i = 0; i < cells(); ++i) {
        if (!valid[i]) continue;
        if (best == -1 || scores[i] > best_s) {
            best = i;
            best_s = scores[i];
        }
    }
    return best;
}

double AffordanceMap::max_score() const {
    const int i = argmax_index();
    if (i < 0) throw EmptyObjectError();
    return scores[i];
}

nn::Tensor make_input_tensor(const Observation& obs) {
    nn::Tensor t = nn::Tensor::zeros({2, obs.rows, obs.cols});
    for (int i = 0; i < obs.cells(); ++i) {
        t.v[i] = obs.occupancy[i] ? 1.0 : 0.0;
        t.v[obs.cells() + i] = obs.height_map[i];
    }
    return t;
}

AffordanceMap pick_map(const nn::AffordanceNet& pick, const Observation& obs) {
    const std::vector<int> occ = obs.occupied_indices();
    if (occ.empty()) throw EmptyObjectError();

    nn::FcnTape tape;
    nn::fcn_forward(pick.backbone, make_input_tensor(obs), tape);

    AffordanceMap map;
    map.kind = AffordanceMap::Kind::Pick;
    map.rows = obs.rows;
    map.cols = obs.cols;
    map.scores.assign(map.cells(), 0.0);
    map.valid.assign(map.cells(), 0);
    for (int idx : occ) {
        const GridCoord c = obs.coord(idx);
        map.scores[idx] =
            nn::head_forward(pick, nn::feature_at(tape.point_features(), c.row, c.col));
        map.valid[idx] = 1;
    }
    return map;
}

AffordanceMap place_map(const nn::AffordanceNet& place, const Observation& obs,
                        const GridCoord& p_pick) {
    if (!obs.occupied(p_pick))
        throw std::invalid_argument("place_map: pick cell is not on the object");

    nn::FcnTape tape;
    nn::fcn_forward(place.backbone, make_input_tensor(obs), tape);
    const std::vector<double> pick_f =
        nn::feature_at(tape.point_features(), p_pick.row, p_pick.col);
    const std::vector<double>& global = tape.global_feature.v;

    AffordanceMap map;
    map.kind = AffordanceMap::Kind::Place;
    map.conditioned_on = p_pick;
    map.rows = obs.rows;
    map.cols = obs.cols;
    map.scores.assign(map.cells(), 0.0);
    map.valid.assign(map.cells(), 1);

    std::vector<double> input(place.head_input_width());
    std::copy(pick_f.begin(), pick_f.end(), input.begin());
    for (int idx = 0; idx < map.cells(); ++idx) {
        const GridCoord c = obs.coord(idx);
        const std::vector<double> place_f =
            nn::feature_at(tape.point_features(), c.row, c.col);
        std::copy(place_f.begin(), place_f.end(), input.begin() + pick_f.size());
        std::copy(global.begin(), global.end(), input.begin() + 2 * pick_f.size());
        map.scores[idx] = nn::head_forward(place, input);
    }
    return map;
}

double aggregate_pick_target(const AffordanceMap& place) { return place.max_score(); }

ValueEstimate estimate_value(const nn::AffordanceNet& pick, const Observation& obs) {
    const AffordanceMap map = pick_map(pick, obs);
    const int idx = map.argmax_index();
    ValueEstimate v;
    v.argmax_pick = obs.coord(idx);
    v.value = percept::clamp01(map.scores[idx]);
    return v;
}

ActionChoice select_action(const nn::AffordanceNet& pick, const nn::AffordanceNet& place,
                           const Observation& obs, double exploration_eps, Rng& rng) {
    const std::vector<int> occ = obs.occupied_indices();
    if (occ.empty()) throw EmptyObjectError();

    if (exploration_eps > 0.0 && rng.uniform() < exploration_eps) {
        ActionChoice a;
        a.explored = true;
        a.pick = obs.coord(occ[rng.bounded(occ.size())]);
        a.place = obs.coord(static_cast<int>(rng.bounded(obs.cells())));
        return a;
    }

    ActionChoice a;
    const AffordanceMap pmap = pick_map(pick, obs);
    a.pick = obs.coord(pmap.argmax_index());
    const AffordanceMap plmap = place_map(place, obs, a.pick);
    a.place = obs.coord(plmap.argmax_index());
    return a;
}

}  // namespace defaff::afford
