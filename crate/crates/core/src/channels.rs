//! Named per-step observation channels.
//!
//! This table is the single binding between the simulator's observations and
//! identifiers usable in reward programs. Order matters: it is the column
//! order of trajectory dumps and the input order of the policy network.

use std::fmt;
use std::ops::{Index, IndexMut};

/// Number of observation channels.
pub const CHANNEL_COUNT: usize = 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    TorsoX,
    Height,
    ForwardSpeed,
    VerticalSpeed,
    Pitch,
    PitchRate,
    Roll,
    Yaw,
    JointAngle(u8),
    JointVel(u8),
    Contact(u8),
    CtrlCost,
    ContactCost,
    ActionDeltaCost,
    Alive,
}

/// Static description of one channel: name, probe extremes and rest value.
#[derive(Debug, Clone, Copy)]
pub struct ChannelInfo {
    pub channel: Channel,
    pub name: &'static str,
    pub min: f64,
    pub max: f64,
    pub rest: f64,
    /// Fixed input scale applied before the policy network.
    pub policy_scale: f64,
}

const PI: f64 = std::f64::consts::PI;

const fn info(
    channel: Channel,
    name: &'static str,
    min: f64,
    max: f64,
    rest: f64,
    policy_scale: f64,
) -> ChannelInfo {
    ChannelInfo {
        channel,
        name,
        min,
        max,
        rest,
        policy_scale,
    }
}

pub const CHANNELS: [ChannelInfo; CHANNEL_COUNT] = [
    // torso_x is excluded from the policy input: gaits must not depend on position.
    info(Channel::TorsoX, "torso_x", -10.0, 10.0, 0.0, 0.0),
    info(Channel::Height, "height", 0.0, 2.0, 0.6, 2.0),
    info(
        Channel::ForwardSpeed,
        "forward_speed",
        -10.0,
        10.0,
        0.0,
        0.5,
    ),
    info(
        Channel::VerticalSpeed,
        "vertical_speed",
        -10.0,
        10.0,
        0.0,
        0.5,
    ),
    info(Channel::Pitch, "pitch", -PI, PI, 0.0, 1.0),
    info(Channel::PitchRate, "pitch_rate", -20.0, 20.0, 0.0, 0.1),
    info(Channel::Roll, "roll", 0.0, 0.0, 0.0, 0.0),
    info(Channel::Yaw, "yaw", 0.0, 0.0, 0.0, 0.0),
    info(Channel::JointAngle(0), "joint_angle_0", -PI, PI, 0.0, 1.0),
    info(Channel::JointAngle(1), "joint_angle_1", -PI, PI, 0.0, 1.0),
    info(Channel::JointAngle(2), "joint_angle_2", -PI, PI, 0.0, 1.0),
    info(Channel::JointAngle(3), "joint_angle_3", -PI, PI, 0.0, 1.0),
    info(Channel::JointVel(0), "joint_vel_0", -30.0, 30.0, 0.0, 0.1),
    info(Channel::JointVel(1), "joint_vel_1", -30.0, 30.0, 0.0, 0.1),
    info(Channel::JointVel(2), "joint_vel_2", -30.0, 30.0, 0.0, 0.1),
    info(Channel::JointVel(3), "joint_vel_3", -30.0, 30.0, 0.0, 0.1),
    info(Channel::Contact(0), "contact_0", 0.0, 1.0, 1.0, 1.0),
    info(Channel::Contact(1), "contact_1", 0.0, 1.0, 1.0, 1.0),
    info(Channel::CtrlCost, "ctrl_cost", 0.0, 4.0, 0.0, 0.25),
    info(Channel::ContactCost, "contact_cost", 0.0, 50.0, 0.0, 0.0),
    info(
        Channel::ActionDeltaCost,
        "action_delta_cost",
        0.0,
        16.0,
        0.0,
        0.0,
    ),
    info(Channel::Alive, "alive", 0.0, 1.0, 1.0, 0.0),
];

impl Channel {
    pub fn index(self) -> usize {
        match self {
            Channel::TorsoX => 0,
            Channel::Height => 1,
            Channel::ForwardSpeed => 2,
            Channel::VerticalSpeed => 3,
            Channel::Pitch => 4,
            Channel::PitchRate => 5,
            Channel::Roll => 6,
            Channel::Yaw => 7,
            Channel::JointAngle(i) => 8 + i as usize,
            Channel::JointVel(i) => 12 + i as usize,
            Channel::Contact(i) => 16 + i as usize,
            Channel::CtrlCost => 18,
            Channel::ContactCost => 19,
            Channel::ActionDeltaCost => 20,
            Channel::Alive => 21,
        }
    }

    pub fn info(self) -> &'static ChannelInfo {
        &CHANNELS[self.index()]
    }

    pub fn name(self) -> &'static str {
        self.info().name
    }

    pub fn from_name(name: &str) -> Option<Channel> {
        CHANNELS.iter().find(|c| c.name == name).map(|c| c.channel)
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One scalar per channel. Produced by the simulator each step and consumed
/// by reward programs, policies and metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation(pub [f64; CHANNEL_COUNT]);

/// Reward programs see observations through this alias.
pub type ChannelRecord = Observation;

impl Default for Observation {
    fn default() -> Self {
        Observation([0.0; CHANNEL_COUNT])
    }
}

impl Observation {
    /// Every channel at its rest value.
    pub fn rest() -> Self {
        let mut o = Observation::default();
        for c in &CHANNELS {
            o[c.channel] = c.rest;
        }
        o
    }

    pub fn get(&self, c: Channel) -> f64 {
        self.0[c.index()]
    }

    pub fn torso_x(&self) -> f64 {
        self[Channel::TorsoX]
    }

    pub fn height(&self) -> f64 {
        self[Channel::Height]
    }

    pub fn pitch(&self) -> f64 {
        self[Channel::Pitch]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn header() -> Vec<&'static str> {
        CHANNELS.iter().map(|c| c.name).collect()
    }
}

impl Index<Channel> for Observation {
    type Output = f64;

    fn index(&self, c: Channel) -> &f64 {
        &self.0[c.index()]
    }
}

impl IndexMut<Channel> for Observation {
    fn index_mut(&mut self, c: Channel) -> &mut f64 {
        &mut self.0[c.index()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_is_consistent() {
        for (i, c) in CHANNELS.iter().enumerate() {
            assert_eq!(c.channel.index(), i, "{}", c.name);
            assert_eq!(Channel::from_name(c.name), Some(c.channel));
            assert!(c.min <= c.rest && c.rest <= c.max, "{}", c.name);
        }
        assert_eq!(Channel::from_name("healthy"), None);
    }
}
