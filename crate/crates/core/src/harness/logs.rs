//! CSV log writers. Columns are fixed; floats use 9 significant digits.

use std::fmt::Write as _;

use crate::manipulator::ArmCommand;
use crate::math::Vec3;
use crate::mission::{MissionState, Transition};
use crate::mppi::{Diagnostics, Setpoint};
use crate::perception::{Detection, TargetEstimate};
use crate::state::{ControlInput, FullState};

/// Scientific notation with 9 significant digits.
pub fn fmt9(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.8e}")
    } else {
        format!("{x}")
    }
}

fn push_vec(row: &mut String, v: &Vec3) {
    for c in v.iter() {
        row.push(',');
        row.push_str(&fmt9(*c));
    }
}

pub const TRAJECTORY_HEADER: &str = "step,time_s,state,\
px_m,py_m,pz_m,vx_m_s,vy_m_s,vz_m_s,qw,qx,qy,qz,wx_rad_s,wy_rad_s,wz_rad_s,\
theta1_rad,theta2_rad,ee_x_m,ee_y_m,ee_z_m,\
est_x_m,est_y_m,est_z_m,est_fresh,true_x_m,true_y_m,true_z_m,\
sp_x_m,sp_y_m,sp_z_m,sp_yaw_rad,thrust_n,tau_x_n_m,tau_y_n_m,tau_z_n_m,\
cmd_theta1_rad,cmd_theta2_rad";

/// Number of columns in a trajectory row.
pub const TRAJECTORY_COLUMNS: usize = 38;

/// One control step of the trajectory log.
pub struct TrajectoryRow<'a> {
    pub step: u64,
    pub time: f64,
    pub state: MissionState,
    pub uav: &'a FullState,
    pub ee: &'a Vec3,
    pub estimate: Option<&'a TargetEstimate>,
    pub true_target: &'a Vec3,
    pub setpoint: &'a Setpoint,
    pub control: &'a ControlInput,
    pub arm_command: &'a ArmCommand,
}

impl TrajectoryRow<'_> {
    pub fn to_csv(&self) -> String {
        let mut row = String::with_capacity(512);
        let _ = write!(row, "{},{},{}", self.step, fmt9(self.time), self.state);
        push_vec(&mut row, &self.uav.p);
        push_vec(&mut row, &self.uav.v);
        for c in self.uav.rotation.wxyz() {
            row.push(',');
            row.push_str(&fmt9(c));
        }
        push_vec(&mut row, &self.uav.omega);
        let _ = write!(row, ",{},{}", fmt9(self.uav.arm.theta1), fmt9(self.uav.arm.theta2));
        push_vec(&mut row, self.ee);
        match self.estimate {
            Some(e) => {
                push_vec(&mut row, &e.position_world);
                let _ = write!(row, ",{}", u8::from(e.fresh));
            }
            None => row.push_str(",,,,0"),
        }
        push_vec(&mut row, self.true_target);
        push_vec(&mut row, &self.setpoint.p_des);
        let _ = write!(row, ",{}", fmt9(self.setpoint.yaw_des));
        let _ = write!(row, ",{}", fmt9(self.control.thrust));
        push_vec(&mut row, &self.control.tau);
        let _ = write!(row, ",{},{}", fmt9(self.arm_command.theta1_des), fmt9(self.arm_command.theta2_des));
        row
    }
}

pub const TRANSITIONS_HEADER: &str = "time_s,from,to,trigger";

pub fn transition_row(t: &Transition) -> String {
    format!("{},{},{},{}", fmt9(t.time), t.from, t.to, t.trigger.name())
}

pub const DETECTIONS_HEADER: &str = "time_s,u_px,v_px,depth_m,valid";

/// Detection trace row; `None` records a frame without a usable detection.
pub fn detection_row(time: f64, d: Option<&Detection>) -> String {
    match d {
        Some(d) => format!("{},{},{},{},{}", fmt9(time), fmt9(d.u), fmt9(d.v), fmt9(d.depth), u8::from(d.valid)),
        None => format!("{},,,,0", fmt9(time)),
    }
}

pub const MPPI_HEADER: &str = "step,min_cost,mean_cost,effective_sample_size";

pub fn mppi_row(step: u64, d: &Diagnostics) -> String {
    format!("{},{},{},{}", step, fmt9(d.min_cost), fmt9(d.mean_cost), fmt9(d.effective_sample_size))
}

/// In-memory CSV document with a header line.
#[derive(Debug, Clone)]
pub struct CsvBuffer {
    text: String,
    rows: usize,
}

impl CsvBuffer {
    pub fn new(header: &str) -> Self {
        let mut text = String::with_capacity(1 << 16);
        text.push_str(header);
        text.push('\n');
        Self { text, rows: 0 }
    }

    pub fn push(&mut self, row: &str) {
        self.text.push_str(row);
        self.text.push('\n');
        self.rows += 1;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}
