//! Pitch, loudness, MFCC and harmonic-profile analysis of a WAV file.
//!
//! `cargo run --example extract_features -- voice.wav`
//! Without an argument a synthetic vocal-like clip is analyzed.

use std::error::Error;

use ddsp_vocal::audio_io::{read_wav, resample, DEFAULT_SAMPLE_RATE};
use ddsp_vocal::features::{
    extract_input_harmonics, extract_mfcc, extract_track, HarmonicConfig, LoudnessConfig, MfccConfig, PitchConfig,
};
use ddsp_vocal::fixtures::vocal_like;

fn main() -> Result<(), Box<dyn Error>> {
    let clip = match std::env::args().nth(1) {
        Some(path) => resample(&read_wav(path)?, DEFAULT_SAMPLE_RATE),
        None => vocal_like(3, 2.0, DEFAULT_SAMPLE_RATE),
    };
    let track = extract_track(&clip, &PitchConfig::default(), &LoudnessConfig::default())?;
    let mfcc = extract_mfcc(&clip, &MfccConfig::default())?;
    let harmonics = extract_input_harmonics(&clip, &track, &HarmonicConfig::default())?;

    let voiced: Vec<f64> = (0..track.len()).filter(|&i| track.is_voiced(i)).map(|i| track.f0[i]).collect();
    println!("{:.2} s, {} frames at {} Hz", clip.duration_secs(), track.len(), track.frame_rate);
    println!("voiced frames: {}", voiced.len());
    if !voiced.is_empty() {
        let lo = voiced.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = voiced.iter().copied().fold(0.0, f64::max);
        println!("f0 range: {lo:.1} .. {hi:.1} Hz");
    }
    let peak = track.loudness.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!("peak loudness: {peak:.1} dB");
    println!("mfcc: {} frames x {} coefficients", mfcc.frames(), mfcc.width());

    println!("frame   f0(Hz)  loud(dB)  conf   A_1..A_4");
    for i in (0..track.len()).step_by(track.len().div_ceil(10).max(1)) {
        let row = harmonics.amplitudes.row(i);
        println!(
            "{i:5}  {:7.1}  {:8.1}  {:4.2}   {:.2} {:.2} {:.2} {:.2}",
            track.f0[i], track.loudness[i], track.confidence[i], row[0], row[1], row[2], row[3]
        );
    }
    Ok(())
}
