use mapfr::ccbs::{ccbs, CcbsOptions};
use mapfr::geometry::validate_plans;
use mapfr::io::grid::{build_graph, make_instance, DEFAULT_RADIUS, DEFAULT_SPEED};
use mapfr::io::movingai::{parse_map, parse_scen};
use mapfr::io::text::{parse_instance, parse_solution, write_instance, write_solution};
use mapfr::model::{check_plan, Solution};
use mapfr::smtcbs::{smt_cbs, SmtOptions};

// A wall with a single gap in the middle column.
const MAP: &str = "type octile
height 5
width 5
map
.....
.....
@@.@@
.....
.....
";

const SCEN: &str = "version 1
0\twall.map\t5\t5\t2\t4\t2\t0\t4.00000000
0\twall.map\t5\t5\t0\t0\t4\t4\t6.82842712
0\twall.map\t5\t5\t4\t0\t0\t4\t6.82842712
";

#[test]
fn map_to_solution_and_back() {
    let map = parse_map(MAP).unwrap();
    let entries = parse_scen(SCEN).unwrap();
    let graph = build_graph(&map, 3).unwrap();
    assert_eq!(graph.vertices.len(), 21);
    let inst = make_instance(&graph, &map, &entries, 2, DEFAULT_RADIUS, DEFAULT_SPEED).unwrap();

    let text = write_instance(&inst);
    let back = parse_instance(&text).unwrap();
    assert_eq!(write_instance(&back), text);

    // The octile distance from the scenario is the single-agent optimum.
    for (a, e) in inst.agents().iter().zip(&entries) {
        assert!((inst.shortest_duration(a).unwrap() - e.optimal_length).abs() < 1e-6);
    }

    let smt = smt_cbs(&back, &SmtOptions::default()).unwrap();
    let cc = ccbs(&back, &CcbsOptions::default()).unwrap();
    assert!((smt.solution.makespan - cc.solution.makespan).abs() < 1e-4);
    // Opposite directions through the gap force someone to wait.
    assert!(smt.solution.makespan > 6.82842712 + 1e-3);

    for sol in [&smt.solution, &cc.solution] {
        let plans = parse_solution(&write_solution(sol)).unwrap();
        let reread = Solution::new(plans).unwrap();
        assert!(reread.plans.iter().all(|p| check_plan(p, &inst).is_ok()));
        assert!((reread.makespan - sol.makespan).abs() < 1e-6);
    }
    assert!(validate_plans(&smt.solution, &inst).unwrap().is_empty());
}

#[test]
fn corner_cutting_is_not_allowed() {
    let map = parse_map("type octile\nheight 2\nwidth 2\nmap\n.@\n..\n").unwrap();
    let graph = build_graph(&map, 3).unwrap();
    // (0,0)-(1,1) would touch the blocked cell's corner region.
    assert!(graph.edges.iter().all(|&(a, b)| !(a.0 == 0 && b.0 == 3)));
    assert_eq!(graph.edges.len(), 2);
}
