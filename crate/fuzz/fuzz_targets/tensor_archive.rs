#![no_main]

use libfuzzer_sys::fuzz_target;
use synsrl_tensor::read_archive;

fuzz_target!(|data: &[u8]| {
    let _ = read_archive::<f64>(data);
    let _ = read_archive::<f32>(data);
});
