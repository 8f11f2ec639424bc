#![no_main]
use current_lab::Network;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(net) = Network::from_json(text) {
        // A valid network survives a round trip unchanged.
        let again = Network::from_json(&net.to_json()).expect("round trip");
        assert_eq!(again.to_spec(), net.to_spec());
    }
});
