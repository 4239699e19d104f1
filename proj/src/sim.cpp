#include "cavsim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "cavsim/coordination.hpp"
#include "cavsim/driver.hpp"

namespace cavsim {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string violation_message(double t, VehicleId leader, VehicleId follower,
                              double gap, double required, double p_leader,
                              double v_leader, double v_follower) {
  std::ostringstream os;
  os << "rear-end gap violation at t=" << t << ": vehicle " << follower
     << " is " << gap << " m behind vehicle " << leader << " (required "
     << required << " m); leader at p=" << p_leader << " v=" << v_leader
     << ", follower v=" << v_follower;
  return os.str();
}

struct ArrivalStream {
  int approach_index = 0;
  double rate_per_s = 0.0;
  std::mt19937_64 rng;
  double next_time = kInf;
  int stream_index = 0;
  int queued = 0;  // arrivals waiting for the entry to clear

  double draw_gap() {
    if (rate_per_s <= 0.0) return kInf;
    const double u =
        (rng() >> 11) * (1.0 / 9007199254740992.0);  // uniform [0,1)
    return -std::log1p(-u) / rate_per_s;
  }
};

struct StopTracker {
  double below_since = kInf;
  bool open = false;
  double dip_start_pos = 0.0;
};

struct SimVehicle {
  VehicleId id = 0;
  int approach_index = 0;
  double spawn_time = 0.0;
  double p = 0.0;
  double v = 0.0;
  double u = 0.0;
  bool planned = false;
  ZoneId planned_zone = 0;  // isolated mode: the zone the active plan targets
  std::size_t next_zone = 0;
  bool flagged = false;
  VehicleId watch_vehicle = 0;  // committed slot predecessor to monitor
  ZoneId watch_zone = 0;
  StopTracker stop;
  int stop_events = 0;
  int stop_events_in_cz = 0;
  double effort = 0.0;     // (1/2) sum u^2 dt
  double vdt_sum = 0.0;    // integral of v dt, integrator bookkeeping
  double srz_speed_max = 0.0;
  EnergyLedger pt_base;
  EnergyLedger pt_opt;
};

struct LaneEntry {
  double p;
  double v;
  double u;  // last executed control, for leader-deceleration estimates
  std::size_t idx;
};

class Simulation {
 public:
  Simulation(const ScenarioConfig& cfg, const ParetoTable* table)
      : cfg_(cfg),
        table_(table),
        coord_(&cfg_.corridor, cfg.scenario == ScenarioKind::corridor
                                   ? CoordinationMode::corridor
                                   : CoordinationMode::isolated,
               cfg.coordination, cfg.bounds, cfg.gap) {
    cfg_.validate();
    const bool cav = cfg_.scenario != ScenarioKind::baseline;
    want_optimal_pt_ = cfg_.pt_policy != PtPolicyKind::baseline;
    want_baseline_pt_ = cfg_.pt_policy != PtPolicyKind::optimal;
    if (want_optimal_pt_ && !table_)
      throw std::logic_error("run_scenario: optimal PT requested without a table");
    (void)cav;
    const double mainline = cfg_.rates.rate(cfg_.demand);
    for (std::size_t i = 0; i < cfg_.corridor.approaches.size(); ++i) {
      ArrivalStream s;
      s.approach_index = static_cast<int>(i);
      s.rate_per_s =
          mainline * cfg_.corridor.approaches[i].demand_fraction / 3600.0;
      s.rng.seed(cfg_.seed * 1000003ULL + i);
      streams_.push_back(std::move(s));
    }
    for (auto& s : streams_) s.next_time = s.draw_gap();
    const Zone* srz = nullptr;
    for (const auto& z : cfg_.corridor.zones)
      if (z.name == "srz") srz = &z;
    srz_ = srz;
  }

  RunOutputs run() {
    const int steps = static_cast<int>(std::llround(cfg_.duration / cfg_.dt));
    for (int k = 0; k < steps; ++k) {
      const double t = k * cfg_.dt;
      spawn_arrivals(t);
      build_lane_index();
      if (cfg_.scenario == ScenarioKind::isolated) request_isolated_plans(t);
      step_vehicles(t);
    }
    finalize();
    return std::move(out_);
  }

 private:
  const Approach& approach_of(const SimVehicle& veh) const {
    return cfg_.corridor.approaches[veh.approach_index];
  }

  std::string lane_of(const SimVehicle& veh) const {
    return cfg_.corridor.lane_at(approach_of(veh), veh.p);
  }

  void spawn_arrivals(double t) {
    // Due arrivals join their lane's entry queue.
    for (auto& s : streams_) {
      while (s.next_time <= t) {
        ++s.queued;
        s.next_time += s.draw_gap();
      }
    }
    // Spawning order: lane name, then stream order (deterministic).
    std::vector<std::size_t> order(streams_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return cfg_.corridor.approaches[a].name < cfg_.corridor.approaches[b].name;
    });
    for (std::size_t oi : order) {
      auto& s = streams_[oi];
      if (s.queued == 0) continue;
      if (!entry_clear(s.approach_index)) continue;
      const auto& app = cfg_.corridor.approaches[s.approach_index];
      ArrivalEvent ev{t, app.name, s.stream_index};
      const VehicleId id = coord_.assign_identity(ev);
      ++s.stream_index;
      --s.queued;

      SimVehicle veh;
      veh.id = id;
      veh.approach_index = s.approach_index;
      veh.spawn_time = t;
      veh.p = 0.0;
      veh.v = app.spawn_speed;
      if (cfg_.scenario == ScenarioKind::corridor) {
        const VehiclePlan& plan =
            coord_.plan_vehicle_corridor(id, app.name, t, veh.v);
        veh.planned = true;
        if (plan.held) {
          veh.flagged = true;
          ++out_.report.safety.held_vehicles;
        }
      }
      vehicles_.push_back(std::move(veh));
      ++out_.report.spawned;
      // One spawn per lane per step keeps entries separated.
    }
  }

  bool entry_clear(int approach_index) {
    const auto& app = cfg_.corridor.approaches[approach_index];
    const std::string entry_lane = app.join_pos > 0.0 ? app.lane : "main";
    const SimVehicle* ahead = nullptr;
    for (const auto& veh : vehicles_) {
      if (lane_of(veh) != entry_lane) continue;
      if (!ahead || veh.p < ahead->p) ahead = &veh;
    }
    if (!ahead) return true;
    // The newcomer starts at the approach speed; demand room for the
    // braking transient if the entry-area leader is slow or braking.
    const double need = gap_required(app.spawn_speed, cfg_.gap) +
                        cfg_.spawn_gap_margin +
                        braking_margin_reserve(app.spawn_speed, ahead->v,
                                               -ahead->u);
    return ahead->p >= need;
  }

  struct Snap {
    VehicleId id;
    double p, v, u;
  };

  void build_lane_index() {
    lanes_.clear();
    snap_.clear();
    for (std::size_t i = 0; i < vehicles_.size(); ++i) {
      const auto& veh = vehicles_[i];
      lanes_[lane_of(veh)].push_back({veh.p, veh.v, veh.u, i});
      snap_.push_back({veh.id, veh.p, veh.v, veh.u});
    }
    for (auto& [lane, list] : lanes_) {
      std::sort(list.begin(), list.end(),
                [](const LaneEntry& a, const LaneEntry& b) { return a.p < b.p; });
    }
  }

  // Start-of-step state; vehicles mutate in id order during the step, so
  // any cross-vehicle read inside the control loop must come from here.
  const Snap* snap_by_id(VehicleId id) const {
    auto it = std::lower_bound(snap_.begin(), snap_.end(), id,
                               [](const Snap& s, VehicleId key) {
                                 return s.id < key;
                               });
    if (it == snap_.end() || it->id != id) return nullptr;
    return &*it;
  }

  struct LeaderFull {
    double gap, speed, accel;
  };

  std::optional<LeaderFull> nearest_ahead(const std::string& lane,
                                          const SimVehicle& veh) const {
    const auto it = lanes_.find(lane);
    if (it == lanes_.end()) return std::nullopt;
    std::optional<LeaderFull> found;
    double best = kInf;
    for (const auto& e : it->second) {
      if (vehicles_[e.idx].id == veh.id) continue;
      if (e.p >= veh.p && e.p < best) {
        best = e.p;
        found = LeaderFull{e.p - veh.p, e.v, e.u};
      }
    }
    return found;
  }

  std::optional<LeaderFull> leader_full(const SimVehicle& veh) const {
    return nearest_ahead(lane_of(veh), veh);
  }

  std::string pred_path_label(VehicleId id, const Zone& z) const {
    for (const auto& other : vehicles_) {
      if (other.id == id)
        return cfg_.corridor.path_label(approach_of(other), z);
    }
    return "main";
  }


  std::optional<LeaderObservation> leader_of(const SimVehicle& veh) const {
    const auto full = leader_full(veh);
    if (!full) return std::nullopt;
    return LeaderObservation{full->gap, full->speed};
  }

  /// Margin the follower can still lose if it brakes at b_f from the next
  /// step while the leader keeps its present deceleration until it stops.
  /// While braking, the required gap relaxes at rho*b_f; erosion happens
  /// only while the closing speed exceeds that relief.
  /// Margin lost to the braking transient when the follower brakes at b_f
  /// while the leader keeps braking at b_l until it stops. The required gap
  /// relaxes at rho*b_f while the follower brakes; erosion happens only
  /// while the closing speed exceeds that relief.
  double braking_dip(double v_self, double v_lead, double b_f,
                     double b_l) const {
    const double relief = cfg_.gap.time_headway * b_f;
    double dip = 0.0;
    double vs = v_self, vl = v_lead;
    const double h = 0.05;
    for (double t = 0.0; t < 15.0; t += h) {
      const double closing = vs - vl;
      if (vs <= 1e-3 || closing <= 0.0) break;
      dip += std::max(0.0, closing - relief) * h;
      vs = std::max(0.0, vs - b_f * h);
      vl = std::max(0.0, vl - b_l * h);
    }
    return dip;
  }

  double assumed_leader_braking(double lead_decel) const {
    // Isolated-mode leaders can leave their plans and escalate, so assume
    // at least a comfortable braking rate; corridor leaders execute their
    // verified plans, so their observed control is trustworthy.
    const double floor =
        cfg_.scenario == ScenarioKind::isolated ? 2.0 : 0.5;
    return std::clamp(std::max(lead_decel, floor), 0.0, -cfg_.bounds.u_min);
  }

  double braking_margin_reserve(double v_self, double v_lead,
                                double lead_decel) const {
    // Guard braking is deliberately softer than the actuator limit: full
    // emergency stops carve slow-moving walls into the stream and doom the
    // next follower; tripping earlier and braking moderately damps chains.
    const double b_f = std::min(2.5, -cfg_.bounds.u_min);
    const double dip =
        braking_dip(v_self, v_lead, b_f, assumed_leader_braking(lead_decel));
    const double pad = cfg_.scenario == ScenarioKind::isolated ? 0.15 : 0.05;
    return dip > 0.0 ? dip + pad : 0.0;
  }

  /// Smallest braking rate that keeps the projected margin positive; the
  /// actuator limit when even that is not enough.
  double needed_braking(double margin, double v_self, double v_lead,
                        double lead_decel) const {
    const double b_l = assumed_leader_braking(lead_decel);
    const double b_max = -cfg_.bounds.u_min;
    const double keep = cfg_.scenario == ScenarioKind::isolated ? 0.35 : 0.1;
    for (double b = 1.0; b < b_max - 1e-9; b += 0.5) {
      if (braking_dip(v_self, v_lead, b, b_l) <= margin - keep) return b;
    }
    return b_max;
  }

  void request_isolated_plans(double t) {
    // Zone queues must honor physical precedence: plan the front-most
    // vehicles first, and let an unplannable vehicle block its same-lane
    // followers rather than have them take slots past it.
    std::vector<std::size_t> order(vehicles_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return vehicles_[a].p > vehicles_[b].p;
    });
    std::set<ZoneId> blocked;
    for (std::size_t idx : order) {
      auto& veh = vehicles_[idx];
      if (veh.planned) continue;
      const auto& app = approach_of(veh);
      if (veh.next_zone >= app.route.size()) continue;
      const Zone& z = cfg_.corridor.zone(app.route[veh.next_zone]);
      if (veh.p < z.control_zone_start || veh.p >= z.entry_pos) continue;
      if (z.entry_pos - veh.p < 5.0) continue;  // too close to plan; filter carries it through
      if (blocked.count(z.id)) continue;
      const VehiclePlan& plan =
          coord_.plan_vehicle_isolated(veh.id, app.name, z.id, t, veh.p, veh.v);
      veh.watch_vehicle = plan.follow_vehicle;
      veh.watch_zone = z.id;
      if (plan.held) {
        // No feasible slot from here: stay in filtered car-following and
        // keep the zone blocked for followers; the next attempts retry
        // from a cooler state (or the vehicle's own committed slot).
        if (!veh.flagged) ++out_.report.safety.held_vehicles;
        veh.flagged = true;
        blocked.insert(z.id);
      } else {
        veh.planned = true;
        veh.planned_zone = z.id;
      }
    }
  }

  double idm_accel(const SimVehicle& veh, double t) const {
    const std::string lane = lane_of(veh);
    DriverParams params = cfg_.driver;
    const auto profile_it = cfg_.corridor.lane_speeds.find(lane);
    const std::vector<SpeedSegment>& profile =
        profile_it != cfg_.corridor.lane_speeds.end()
            ? profile_it->second
            : cfg_.corridor.lane_speeds.at("main");
    params.desired_speed = anticipated_desired_speed(
        veh.p, cfg_.corridor.desired_speed_at(lane, veh.p), profile,
        cfg_.driver.comfort_decel);

    auto leader = leader_of(veh);

    if (cfg_.scenario == ScenarioKind::baseline) {
      apply_stop_line_rules(veh, t, leader);
    }
    if (leader && leader->gap <= 0.0) {
      return cfg_.bounds.u_min;  // overlapping states; emergency braking
    }
    return follow_accel(veh.v, leader, params, cfg_.bounds);
  }

  /// Yield / signal handling: models a stop line as a standing virtual
  /// leader when the vehicle has not yet committed past it.
  void apply_stop_line_rules(const SimVehicle& veh, double t,
                             std::optional<LeaderObservation>& leader) const {
    const auto& app = approach_of(veh);
    // Gap acceptance where this approach joins the priority lane.
    if (app.join_pos > 0.0) {
      for (const auto& z : cfg_.corridor.zones) {
        if (std::abs(z.entry_pos - app.join_pos) > 1e-9) continue;
        const double line = z.entry_pos - cfg_.yield.stop_line_offset;
        if (veh.p >= line || veh.p < z.control_zone_start) continue;
        // Accel-limited time to reach the zone entry, plus a commitment
        // buffer; optimistic estimates here squeeze mainline followers.
        const double dist = z.entry_pos - veh.p;
        const double a_launch = cfg_.driver.max_accel;
        const double own_eta =
            (std::sqrt(veh.v * veh.v + 2.0 * a_launch * dist) - veh.v) /
                a_launch + 0.3;
        std::vector<double> etas;
        const auto it = lanes_.find("main");
        if (it != lanes_.end()) {
          for (const auto& e : it->second) {
            if (e.p > z.entry_pos) continue;  // already through
            const double eta = (z.entry_pos - e.p) / std::max(e.v, 0.5);
            if (eta < 12.0) etas.push_back(eta);
          }
        }
        if (yield_decision(own_eta, etas, cfg_.yield) ==
            YieldDecision::stop_at_line) {
          const double gap = line - veh.p;
          if (!leader || gap < leader->gap) leader = LeaderObservation{gap, 0.0};
        }
      }
    }
    // Optional fixed-time signal.
    if (cfg_.signal) {
      const Zone& z = cfg_.corridor.zone(cfg_.signal->zone);
      const double line = z.entry_pos - cfg_.yield.stop_line_offset;
      if (veh.p < line && veh.p >= z.control_zone_start &&
          signal_phase(t, cfg_.signal->spec) == SignalPhase::red) {
        const double gap = line - veh.p;
        if (!leader || gap < leader->gap) leader = LeaderObservation{gap, 0.0};
      }
    }
  }

  void step_vehicles(double t) {
    const double dt = cfg_.dt;
    const bool cav = cfg_.scenario != ScenarioKind::baseline;

    for (auto& veh : vehicles_) {
      double p_next, v_next, u_exec;
      const VehiclePlan* plan = veh.planned ? coord_.plan_of(veh.id) : nullptr;

      bool follow_plan = veh.planned && plan && !plan->trajectory.empty();
      bool plan_exhausted = false;

      // Desired motion: the plan when one is active, car-following
      // otherwise.
      if (follow_plan) {
        u_exec = plan->trajectory.accel(t);
        const double t_end = plan->trajectory.end_time();
        if (t + dt >= t_end - 1e-9) {
          // Plan ends mid-step: ride the terminal speed through the
          // remainder so the hand-over loses no motion.
          const double v_end = plan->trajectory.speed(t_end);
          p_next = plan->trajectory.position(t_end) + (t + dt - t_end) * v_end;
          v_next = v_end;
          plan_exhausted = true;
        } else {
          p_next = plan->trajectory.position(t + dt);
          v_next = plan->trajectory.speed(t + dt);
        }
      } else {
        u_exec = idm_accel(veh, t);
        v_next = std::max(0.0, veh.v + u_exec * dt);
        p_next = veh.p + v_next * dt;
      }

      // Safety filter (connected scenarios): every vehicle, open-loop or
      // car-following, must leave room for the braking transient against
      // its realized leader and its committed slot predecessor. When the
      // projection falls short the filter overrides with exactly the
      // braking the state requires.
      if (cav) {
        double worst_next = kInf;   // projected post-step margin less dip
        double margin_now = kInf;   // current margin, for the override law
        double lead_v_now = 0.0, lead_u_now = 0.0;
        bool have_target = false;
        auto consider = [&](double lead_p, double lead_v, double lead_u) {
          const double lead_next =
              lead_p +
              std::max(0.0, lead_v * dt + 0.5 * cfg_.bounds.u_min * dt * dt);
          const double next_margin =
              lead_next - p_next - gap_required(std::max(0.0, v_next), cfg_.gap);
          const double dip = braking_margin_reserve(std::max(0.0, v_next),
                                                    lead_v, -lead_u);
          if (next_margin - dip < worst_next) {
            worst_next = next_margin - dip;
            margin_now = lead_p - veh.p - gap_required(veh.v, cfg_.gap);
            lead_v_now = lead_v;
            lead_u_now = lead_u;
            have_target = true;
          }
        };
        if (const auto leader = leader_full(veh))
          consider(veh.p + leader->gap, leader->speed, leader->accel);
        // Approaching a conflict zone, anything already past its entry is
        // on this vehicle's roadway regardless of which approach fed it;
        // watch the nearest such vehicle (a late or early crosser may not
        // be the same-lane leader yet).
        const auto& app_f = approach_of(veh);
        if (veh.next_zone < app_f.route.size()) {
          const Zone& nz = cfg_.corridor.zone(app_f.route[veh.next_zone]);
          if (veh.p >= nz.control_zone_start && veh.p < nz.entry_pos) {
            // Own expected entry time: the committed slot, or a kinematic
            // estimate when the slot was abandoned.
            double own_eta = t + (nz.entry_pos - veh.p) / std::max(veh.v, 1.0);
            if (const auto slot = coord_.committed_slot(veh.id, nz.id))
              own_eta = std::max(own_eta, *slot);
            const Snap* merged = nullptr;
            for (const auto& other : snap_) {
              if (other.id == veh.id || other.p <= veh.p) continue;
              bool relevant = other.p >= nz.entry_pos;  // already through
              if (!relevant && nz.entry_pos - other.p < 40.0) {
                // Near the entry on either approach: binds when it can
                // cross first - by its committed slot or, for a vehicle
                // running off its slot, by plain kinematics.
                const auto their = coord_.committed_slot(other.id, nz.id);
                double their_eta =
                    t + (nz.entry_pos - other.p) / std::max(other.v, 0.5);
                if (their) their_eta = std::min(their_eta, *their);
                relevant = their_eta < own_eta + 1.0;
              }
              if (relevant && (!merged || other.p < merged->p))
                merged = &other;
            }
            if (merged) consider(merged->p, merged->v, merged->u);
          }
        }
        // The slot predecessor's position only binds once they share a
        // roadway: after it crosses the entry, or with both converging.
        if (veh.watch_vehicle != 0 && veh.watch_zone != 0) {
          if (const Snap* pred = snap_by_id(veh.watch_vehicle)) {
            const Zone& pz = cfg_.corridor.zone(veh.watch_zone);
            const bool pred_through = pred->p >= pz.entry_pos;
            const bool both_close = pz.entry_pos - pred->p < 50.0 &&
                                    pz.entry_pos - veh.p < 50.0;
            if (pred->p > veh.p && veh.p < pz.entry_pos + pz.length &&
                (pred_through || both_close))
              consider(pred->p, pred->v, pred->u);
          }
        }
        // Realized slot discipline at the entry: nobody crosses within the
        // required headway of its predecessor's realized (or projected)
        // crossing, plans notwithstanding. Off-slot vehicles additionally
        // pace themselves to their own committed time.
        if (veh.next_zone < app_f.route.size()) {
          const Zone& nz = cfg_.corridor.zone(app_f.route[veh.next_zone]);
          if (veh.p >= nz.control_zone_start && veh.p < nz.entry_pos) {
            double not_before = -kInf;
            if (!follow_plan && veh.flagged) {
              if (const auto slot = coord_.committed_slot(veh.id, nz.id))
                not_before = std::max(not_before, *slot - 0.2);
            }
            const std::string my_path = cfg_.corridor.path_label(app_f, nz);
            auto headway_for = [&](const std::string& pred_path) {
              return cfg_.corridor.conflicting(nz, my_path, pred_path)
                         ? cfg_.coordination.h_lat
                         : cfg_.coordination.h_rear;
            };
            // Whoever actually crossed last sets the floor.
            auto last = last_cross_.find(nz.id);
            if (last != last_cross_.end()) {
              not_before = std::max(
                  not_before,
                  last->second.first + headway_for(last->second.second) + 0.15);
            }
            // Anyone on approach who will plausibly cross first sets a
            // projected floor: the committed predecessor, any near-entry
            // earlier-crosser, and - for a vehicle holding no slot of its
            // own - every slotted vehicle nearby (no slot, no claim).
            const bool have_own_slot =
                coord_.committed_slot(veh.id, nz.id).has_value();
            double my_eta_est =
                t + (nz.entry_pos - veh.p) / std::max(veh.v, 0.5);
            const std::string own_label = cfg_.corridor.path_label(app_f, nz);
            const auto own_slot = coord_.committed_slot(veh.id, nz.id);
            // An on-plan vehicle knows its crossing exactly; kinematic
            // extrapolation under-estimates it badly mid-deceleration.
            if (follow_plan && plan) {
              if (const auto t_sched = plan->schedule.time_at(nz.id))
                my_eta_est = std::max(my_eta_est, *t_sched);
            }
            for (const auto& other : snap_) {
              if (other.id == veh.id || other.p >= nz.entry_pos) continue;
              const std::string other_label = pred_path_label(other.id, nz);
              const auto their_slot = coord_.committed_slot(other.id, nz.id);
              const double their_kin_eta =
                  t + (nz.entry_pos - other.p) / std::max(other.v, 0.5);
              if (other.p <= veh.p) {
                // Cross-lane traffic still behind this position: the slot
                // order is the contract; yield to earlier slots (or to any
                // slot when holding none), wherever they are.
                if (other_label == own_label) continue;
                if (nz.entry_pos - other.p > 120.0) continue;
                const bool they_precede =
                    their_slot &&
                    (!own_slot || *their_slot < *own_slot);
                if (they_precede) {
                  not_before = std::max(
                      not_before,
                      their_kin_eta + headway_for(other_label) + 0.15);
                }
                continue;
              }
              const bool committed_pred = other.id == veh.watch_vehicle &&
                                          veh.watch_zone == nz.id;
              double their_eta = their_kin_eta;
              if (their_slot) their_eta = std::min(their_eta, *their_slot);
              const bool near_entry = nz.entry_pos - other.p < 40.0;
              // Holding no slot, a vehicle has no claim anywhere in the
              // control zone; with one, only near-entry traffic binds.
              const bool yields_to = !have_own_slot && their_slot.has_value();
              if (!committed_pred && !yields_to &&
                  !(near_entry && their_eta < my_eta_est + 1.0))
                continue;
              not_before = std::max(
                  not_before,
                  their_eta + headway_for(other_label) + 0.15);
            }
            if (not_before > t) {
              if (my_eta_est < not_before) {
                const double gap_to_entry = nz.entry_pos - veh.p;
                // Crawl floor: pace, never stop, inside a control zone.
                const double allowed = std::max(
                    gap_to_entry / std::max(not_before - t, 0.2), 0.6);
                if (veh.v > allowed || u_exec > 0.0) {
                  // Close the speed excess within about a second, up to
                  // the actuator limit.
                  const double brake = std::clamp(
                      (allowed - veh.v) / 1.0, cfg_.bounds.u_min, -1.0);
                  if (brake < u_exec) {
                    u_exec = brake;
                    v_next = std::max(0.0, veh.v + u_exec * dt);
                    p_next = veh.p + v_next * dt;
                    if (follow_plan) {
                      follow_plan = false;
                      veh.planned = false;
                      veh.flagged = true;
                      ++out_.report.safety.guard_activations;
                    }
                  }
                }
              }
            }
          }
        }
        const double engage =
            cfg_.scenario == ScenarioKind::isolated ? 0.5 : 0.08;
        if (have_target && worst_next < engage) {
          const double b =
              needed_braking(margin_now, veh.v, lead_v_now, -lead_u_now);
          const double u_brake = -b;
          if (u_brake < u_exec - 1e-12) {
            u_exec = u_brake;
            v_next = std::max(0.0, veh.v + u_exec * dt);
            p_next = veh.p + v_next * dt;
            if (follow_plan) {
              follow_plan = false;
              veh.planned = false;
              veh.flagged = true;
              ++out_.report.safety.guard_activations;
            }
          }
        }
      }
      if (follow_plan && plan_exhausted)
        veh.planned = false;  // car-following resumes next step
      if (v_next == 0.0 && veh.v > 0.0 && u_exec < -veh.v / dt)
        u_exec = -veh.v / dt;

      // Powertrain runs on the commanded state of this step.
      const TorqueDemand demand = torque_demand(veh.v, u_exec, cfg_.powertrain.load);
      const PowertrainState pt_state{
          std::max(demand.shaft_rpm, cfg_.powertrain.idle_rpm),
          demand.shaft_rpm};
      double t_eng_log = 0.0, t_mot_log = 0.0, fuel_rate = 0.0;
      if (want_baseline_pt_) {
        const double fuel_before = veh.pt_base.fuel_g;
        const SplitResult r =
            baseline_policy(pt_state, demand.torque, cfg_.powertrain);
        step_energy(veh.pt_base, pt_state, r, demand.torque, demand.shaft_rpm,
                    cfg_.powertrain.alpha, dt, cfg_.powertrain);
        fuel_rate = (veh.pt_base.fuel_g - fuel_before) / dt;
        t_eng_log = r.split.engine;
        t_mot_log = r.split.motor;
      }
      if (want_optimal_pt_) {
        const double fuel_before = veh.pt_opt.fuel_g;
        const SplitResult r = optimal_split(veh, pt_state, demand.torque);
        step_energy(veh.pt_opt, pt_state, r, demand.torque, demand.shaft_rpm,
                    cfg_.powertrain.alpha, dt, cfg_.powertrain);
        fuel_rate = (veh.pt_opt.fuel_g - fuel_before) / dt;
        t_eng_log = r.split.engine;
        t_mot_log = r.split.motor;
      }

      if (cfg_.log_trajectories) {
        out_.trajectories.push_back(
            {t, veh.id, veh.p, veh.v, u_exec, t_eng_log, t_mot_log, fuel_rate});
      }

      // Zone crossings realized in this step.
      const auto& app = approach_of(veh);
      while (veh.next_zone < app.route.size()) {
        const Zone& z = cfg_.corridor.zone(app.route[veh.next_zone]);
        if (p_next < z.entry_pos) break;
        const double frac =
            (p_next > veh.p) ? (z.entry_pos - veh.p) / (p_next - veh.p) : 1.0;
        const double t_cross = t + frac * dt;
        coord_.notify_crossing(veh.id, z.id, t_cross, v_next);
        realized_cross_[{veh.id, z.id}] = t_cross;
        last_cross_[z.id] = {t_cross, cfg_.corridor.path_label(app, z)};
        out_.report.crossings.push_back(
            {veh.id, z.id, t_cross, cfg_.corridor.path_label(app, z)});
        if (plan && !veh.flagged) {
          if (auto t_sched = plan->schedule.time_at(z.id)) {
            out_.report.safety.max_schedule_deviation =
                std::max(out_.report.safety.max_schedule_deviation,
                         std::abs(t_cross - *t_sched));
          }
        }
        ++veh.next_zone;
      }

      veh.effort += 0.5 * u_exec * u_exec * dt;
      veh.vdt_sum += p_next - veh.p;
      veh.u = u_exec;
      veh.p = p_next;
      veh.v = v_next;

      if (srz_ && veh.p >= srz_->entry_pos + 30.0 &&
          veh.p < srz_->entry_pos + srz_->length) {
        veh.srz_speed_max = std::max(veh.srz_speed_max, veh.v);
      }

      update_stop_tracker(veh, t + dt);
    }

    audit_gaps(t + dt, cav);
    handle_exits(t + dt);
  }

  SplitResult optimal_split(SimVehicle& veh, const PowertrainState& state,
                            double t_driver) {
    const auto& pt = cfg_.powertrain;
    if (pt.battery_capacity_wh &&
        veh.pt_opt.battery_net_wh() >= *pt.battery_capacity_wh &&
        t_driver > 0.0) {
      // Battery depleted: engine covers the demand, motor only assists
      // beyond the engine limit; regeneration unaffected.
      SplitResult r;
      r.split.engine = std::min(t_driver, pt.engine.max_torque_nm);
      r.split.motor = t_driver - r.split.engine;
      return r;
    }
    return online_policy(*table_, state, t_driver, pt.alpha, pt);
  }

  void update_stop_tracker(SimVehicle& veh, double t_now) {
    auto& st = veh.stop;
    if (veh.v < cfg_.stop_event.speed_threshold) {
      if (st.below_since == kInf) {
        st.below_since = t_now;
        st.dip_start_pos = veh.p;
      }
      if (!st.open && t_now - st.below_since >= cfg_.stop_event.min_duration) {
        st.open = true;
        ++veh.stop_events;
        bool in_cz = false;
        for (const auto& z : cfg_.corridor.zones)
          if (z.in_control_zone(st.dip_start_pos)) in_cz = true;
        if (in_cz) ++veh.stop_events_in_cz;
      }
    } else {
      st.below_since = kInf;
      st.open = false;
    }
  }

  void audit_gaps(double t, bool cav) {
    build_lane_index();
    for (const auto& [lane, list] : lanes_) {
      for (std::size_t i = 1; i < list.size(); ++i) {
        const auto& follower = vehicles_[list[i - 1].idx];
        const auto& leader = vehicles_[list[i].idx];
        const double gap = leader.p - follower.p;
        const double required = gap_required(follower.v, cfg_.gap);
        out_.report.safety.min_gap_margin =
            std::min(out_.report.safety.min_gap_margin, gap - required);
        if (gap < required - cfg_.coordination.safety_slack) {
          if (cav) {
            ++out_.report.safety.cav_gap_violations;
            throw SafetyViolationError(t, leader.id, follower.id, gap, required,
                                       leader.p, leader.v, follower.v);
          }
          ++out_.report.safety.baseline_undershoots;
          if (gap <= 0.0)
            throw SafetyViolationError(t, leader.id, follower.id, gap, required,
                                       leader.p, leader.v, follower.v);
        }
      }
    }
  }

  void handle_exits(double t) {
    for (auto it = vehicles_.begin(); it != vehicles_.end();) {
      if (it->p < cfg_.corridor.total_length) {
        ++it;
        continue;
      }
      finalize_vehicle(*it, t);
      it = vehicles_.erase(it);
    }
  }

  void finalize_vehicle(const SimVehicle& veh, double t_exit) {
    VehicleMetrics m;
    m.id = veh.id;
    m.approach = approach_of(veh).name;
    m.entry_time = veh.spawn_time;
    m.exit_time = t_exit;
    m.travel_time = t_exit - veh.spawn_time;
    m.distance_km = cfg_.corridor.total_length / 1000.0;
    m.stop_events = veh.stop_events;
    m.stop_events_in_control_zones = veh.stop_events_in_cz;
    m.effort_cost = veh.effort;
    m.srz_speed_max = veh.srz_speed_max;
    m.flagged = veh.flagged;
    m.counted = veh.spawn_time >= cfg_.warmup;
    m.pt_baseline = pt_metrics_from_ledger(veh.pt_base, m.distance_km,
                                           cfg_.powertrain.fuel_lhv_j_per_kg);
    m.pt_optimal = pt_metrics_from_ledger(veh.pt_opt, m.distance_km,
                                          cfg_.powertrain.fuel_lhv_j_per_kg);
    out_.report.max_conservation_error_m =
        std::max(out_.report.max_conservation_error_m,
                 std::abs(veh.p - veh.vdt_sum));
    ++out_.report.completed;
    out_.report.vehicles.push_back(std::move(m));
  }

  void finalize() {
    out_.report.config = cfg_;
    out_.report.fleet = aggregate_fleet(out_.report.vehicles);
    std::ostringstream sched;
    coord_.dump_schedule_csv(sched);
    out_.schedule_csv = sched.str();
  }

  ScenarioConfig cfg_;
  const ParetoTable* table_;
  Coordinator coord_;
  bool want_optimal_pt_ = true;
  bool want_baseline_pt_ = true;
  std::vector<ArrivalStream> streams_;
  std::vector<SimVehicle> vehicles_;
  std::map<std::string, std::vector<LaneEntry>> lanes_;
  std::vector<Snap> snap_;
  std::map<std::pair<VehicleId, ZoneId>, double> realized_cross_;
  std::map<ZoneId, std::pair<double, std::string>> last_cross_;
  const Zone* srz_ = nullptr;
  RunOutputs out_;
};

}  // namespace

SafetyViolationError::SafetyViolationError(double t, VehicleId leader,
                                           VehicleId follower, double gap,
                                           double required, double p_leader,
                                           double v_leader, double v_follower)
    : std::runtime_error(violation_message(t, leader, follower, gap, required,
                                           p_leader, v_leader, v_follower)),
      time_(t),
      leader_(leader),
      follower_(follower) {}

RunOutputs run_scenario(const ScenarioConfig& config, const ParetoTable* table) {
  ParetoTable local;
  if (config.pt_policy != PtPolicyKind::baseline && table == nullptr) {
    local = build_pareto_table(config.powertrain.table_grids, config.powertrain);
    table = &local;
  }
  Simulation sim(config, table);
  return sim.run();
}

}  // namespace cavsim
