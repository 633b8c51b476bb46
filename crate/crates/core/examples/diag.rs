// criterion-9 preview: trained vs untrained consistency, horizon sweep
use lucid::checkpoint;
use lucid::harness::imagine_batch;
use lucid::logic::LogicParams;
use lucid::reasoning::logical_consistency;
use lucid::rng::stream;

fn main() {
    let state = checkpoint::load(std::path::Path::new("/tmp/run_full/checkpoint.bin")).unwrap();
    let untrained = LogicParams::new(&mut stream(900, "untrained", 0), state.logic.cfg);
    for h in [10usize, 30, 50, 100] {
        let (lat, act) = imagine_batch(&state, 100, h, "consistency").unwrap();
        let trained = logical_consistency(&state.logic, &lat, &act, 30, h).unwrap();
        let untr = logical_consistency(&untrained, &lat, &act, 30, h).unwrap();
        println!("H={h:3}: trained {:.4} +/- {:.4} | untrained {:.4}", trained.mean, trained.std, untr.mean);
    }
}
