#![no_main]

use fuzzdrive::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = RunConfig::from_toml_str(text) {
        cfg.sim_config()
            .validate()
            .expect("accepted config must validate");
        cfg.swarm_config()
            .validate()
            .expect("accepted swarm must validate");
    }
});
