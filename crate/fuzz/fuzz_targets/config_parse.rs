#![no_main]

use libfuzzer_sys::fuzz_target;
use vll_cli::config::parse_config_str;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = parse_config_str(text) {
        let _ = p.config.validate();
        let _ = parse_config_str(&p.config.to_toml()).expect("serialized config parses");
    }
});
